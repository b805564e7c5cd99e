#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "fbsec/bytes.hpp"

namespace fbsec::net {

// Bit-exact datagram layout, big-endian throughout:
//   magic 0xFB 0x5E | version 0x01 | msg_type u8 | link_id u32 | sender_id u16
//   | key_epoch u8 | seq u32 | payload_len u16 | payload
// Header is 17 bytes; total length is 17 + payload_len.

inline constexpr std::uint8_t kMagic0 = 0xFB;
inline constexpr std::uint8_t kMagic1 = 0x5E;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderLen = 17;

enum class MsgType : std::uint8_t {
    Data = 0x01,    // whole AES blocks of ciphertext
    KeInit = 0x02,  // initiator's public value
    KeResp = 0x03,  // responder's public value
    Ts = 0x04,      // 8-byte millisecond timestamp
};

struct WireFrame {
    MsgType msg_type = MsgType::Data;
    std::uint32_t link_id = 0;
    std::uint16_t sender_id = 0;
    std::uint8_t key_epoch = 0;
    std::uint32_t seq = 0;
    byte_vec payload;

    bool operator==(const WireFrame&) const = default;
};

enum class EncodeError { PayloadTooLong, DataNotBlockAligned, BadTsPayload, EmptyKePayload };
enum class DecodeError { BadMagic, BadVersion, BadType, Truncated, BadLength };

const char* encode_error_name(EncodeError e);
const char* decode_error_name(DecodeError e);

/// Validates the per-type payload invariants before laying out bytes.
std::variant<byte_vec, EncodeError> encode_frame(const WireFrame& frame);

struct DecodeResult {
    std::optional<WireFrame> frame;
    std::optional<DecodeError> error;
    bool ok() const { return frame.has_value(); }
};

/// Strict decoding: bad magic/version/type, truncation and length or
/// alignment violations are all rejected with a reason code.
DecodeResult decode_frame(std::span<const std::uint8_t> bytes);

WireFrame make_data_frame(std::uint32_t link, std::uint16_t sender, std::uint8_t epoch,
                          std::uint32_t seq, byte_vec ciphertext);
WireFrame make_ts_frame(std::uint32_t link, std::uint16_t sender, std::uint32_t seq,
                        std::uint64_t millis);
std::uint64_t ts_payload_millis(const WireFrame& frame);  // requires msg_type == Ts

}  // namespace fbsec::net
