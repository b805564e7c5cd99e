#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

#include "fbsec/bytes.hpp"

namespace fbsec::crypto {

/// AES key width. The width fixes the round count: 10, 12 or 14.
enum class KeySize : std::uint16_t { Bits128 = 128, Bits192 = 192, Bits256 = 256 };

KeySize key_size_from_bits(unsigned bits);  // throws std::invalid_argument for anything but 128/192/256

constexpr unsigned key_bytes(KeySize ks) { return static_cast<unsigned>(ks) / 8; }
constexpr unsigned rounds(KeySize ks) {
    switch (ks) {
        case KeySize::Bits128: return 10;
        case KeySize::Bits192: return 12;
        case KeySize::Bits256: return 14;
    }
    return 0;
}

/// Expanded round-key material. Length is 16*(rounds+1): 176, 208 or 240 bytes.
struct KeySchedule {
    KeySize ksize = KeySize::Bits128;
    byte_vec expanded;

    bool operator==(const KeySchedule&) const = default;
};

/// Rijndael key expansion. The first key_bytes(ksize) bytes of the result
/// equal the input key. Throws std::invalid_argument on a length mismatch.
KeySchedule aes_key_expansion(std::span<const std::uint8_t> key, KeySize ksize);

/// Reconstructs a schedule from raw expanded bytes (176/208/240 long).
KeySchedule key_schedule_from_expanded(std::span<const std::uint8_t> expanded);

Block16 aes_encrypt_block(const Block16& pt, const KeySchedule& sched);
Block16 aes_decrypt_block(const Block16& ct, const KeySchedule& sched);

/// Only ECB ships; the mode is a parameter so other modes can slot in later.
/// ECB leaks equal-block structure, which is why the boolean alias encoding
/// randomises its padding bytes.
enum class CipherMode { Ecb };

byte_vec aes_encrypt(std::span<const std::uint8_t> pt, const KeySchedule& sched,
                     CipherMode mode = CipherMode::Ecb);
byte_vec aes_decrypt(std::span<const std::uint8_t> ct, const KeySchedule& sched,
                     CipherMode mode = CipherMode::Ecb);

}  // namespace fbsec::crypto
