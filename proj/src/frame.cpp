#include "fbsec/frame.hpp"

#include <cassert>

namespace fbsec::net {

const char* encode_error_name(EncodeError e) {
    switch (e) {
        case EncodeError::PayloadTooLong: return "PAYLOAD_TOO_LONG";
        case EncodeError::DataNotBlockAligned: return "DATA_NOT_BLOCK_ALIGNED";
        case EncodeError::BadTsPayload: return "BAD_TS_PAYLOAD";
        case EncodeError::EmptyKePayload: return "EMPTY_KE_PAYLOAD";
    }
    return "?";
}

const char* decode_error_name(DecodeError e) {
    switch (e) {
        case DecodeError::BadMagic: return "BAD_MAGIC";
        case DecodeError::BadVersion: return "BAD_VERSION";
        case DecodeError::BadType: return "BAD_TYPE";
        case DecodeError::Truncated: return "TRUNCATED";
        case DecodeError::BadLength: return "BAD_LENGTH";
    }
    return "?";
}

namespace {

std::optional<EncodeError> check_payload(const WireFrame& f) {
    if (f.payload.size() > 0xffff) return EncodeError::PayloadTooLong;
    switch (f.msg_type) {
        case MsgType::Data:
            if (f.payload.empty() || f.payload.size() % 16 != 0)
                return EncodeError::DataNotBlockAligned;
            break;
        case MsgType::Ts:
            if (f.payload.size() != 8) return EncodeError::BadTsPayload;
            break;
        case MsgType::KeInit:
        case MsgType::KeResp:
            if (f.payload.empty()) return EncodeError::EmptyKePayload;
            break;
    }
    return std::nullopt;
}

}  // namespace

std::variant<byte_vec, EncodeError> encode_frame(const WireFrame& frame) {
    if (auto err = check_payload(frame)) return *err;

    byte_vec out;
    out.reserve(kHeaderLen + frame.payload.size());
    out.push_back(kMagic0);
    out.push_back(kMagic1);
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(frame.msg_type));
    put_be32(out, frame.link_id);
    put_be16(out, frame.sender_id);
    out.push_back(frame.key_epoch);
    put_be32(out, frame.seq);
    put_be16(out, static_cast<std::uint16_t>(frame.payload.size()));
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

DecodeResult decode_frame(std::span<const std::uint8_t> bytes) {
    auto fail = [](DecodeError e) { return DecodeResult{std::nullopt, e}; };

    if (bytes.size() < kHeaderLen) {
        // Distinguish obviously-foreign data from short reads of our own.
        if (bytes.size() >= 2 && (bytes[0] != kMagic0 || bytes[1] != kMagic1))
            return fail(DecodeError::BadMagic);
        return fail(DecodeError::Truncated);
    }
    if (bytes[0] != kMagic0 || bytes[1] != kMagic1) return fail(DecodeError::BadMagic);
    if (bytes[2] != kVersion) return fail(DecodeError::BadVersion);
    if (bytes[3] < 0x01 || bytes[3] > 0x04) return fail(DecodeError::BadType);

    WireFrame f;
    f.msg_type = static_cast<MsgType>(bytes[3]);
    f.link_id = get_be32(bytes, 4);
    f.sender_id = get_be16(bytes, 8);
    f.key_epoch = bytes[10];
    f.seq = get_be32(bytes, 11);
    const std::uint16_t plen = get_be16(bytes, 15);

    if (bytes.size() < kHeaderLen + plen) return fail(DecodeError::Truncated);
    if (bytes.size() > kHeaderLen + plen) return fail(DecodeError::BadLength);
    f.payload.assign(bytes.begin() + kHeaderLen, bytes.end());

    // Re-apply the per-type invariants on the way in.
    if (check_payload(f)) return fail(DecodeError::BadLength);
    return DecodeResult{std::move(f), std::nullopt};
}

WireFrame make_data_frame(std::uint32_t link, std::uint16_t sender, std::uint8_t epoch,
                          std::uint32_t seq, byte_vec ciphertext) {
    WireFrame f;
    f.msg_type = MsgType::Data;
    f.link_id = link;
    f.sender_id = sender;
    f.key_epoch = epoch;
    f.seq = seq;
    f.payload = std::move(ciphertext);
    return f;
}

WireFrame make_ts_frame(std::uint32_t link, std::uint16_t sender, std::uint32_t seq,
                        std::uint64_t millis) {
    WireFrame f;
    f.msg_type = MsgType::Ts;
    f.link_id = link;
    f.sender_id = sender;
    f.seq = seq;
    put_be64(f.payload, millis);
    return f;
}

std::uint64_t ts_payload_millis(const WireFrame& frame) {
    assert(frame.msg_type == MsgType::Ts && frame.payload.size() == 8);
    return get_be64(frame.payload, 0);
}

}  // namespace fbsec::net
