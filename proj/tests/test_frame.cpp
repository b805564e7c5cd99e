#include <random>

#include "doctest.h"
#include "fbsec/frame.hpp"

using namespace fbsec;
using namespace fbsec::net;

namespace {

WireFrame random_valid_frame(std::mt19937_64& rng) {
    WireFrame f;
    switch (rng() % 4) {
        case 0: {
            f.msg_type = MsgType::Data;
            f.payload.resize(16 * (1 + rng() % 4));
            break;
        }
        case 1:
            f.msg_type = MsgType::KeInit;
            f.payload.resize(1 + rng() % 300);
            break;
        case 2:
            f.msg_type = MsgType::KeResp;
            f.payload.resize(1 + rng() % 300);
            break;
        default:
            f.msg_type = MsgType::Ts;
            f.payload.resize(8);
            break;
    }
    for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng());
    f.link_id = static_cast<std::uint32_t>(rng());
    f.sender_id = static_cast<std::uint16_t>(rng());
    f.key_epoch = static_cast<std::uint8_t>(rng());
    f.seq = static_cast<std::uint32_t>(rng());
    return f;
}

}  // namespace

TEST_CASE("golden 33-byte data frame layout") {
    WireFrame f = make_data_frame(1, 2, 0, 0, byte_vec(16, 0xAA));
    auto encoded = encode_frame(f);
    REQUIRE(std::holds_alternative<byte_vec>(encoded));
    const byte_vec& bytes = std::get<byte_vec>(encoded);

    // header 17 bytes + one AES block
    REQUIRE(bytes.size() == 33);
    const byte_vec expected = {
        0xFB, 0x5E,              // magic
        0x01,                    // version
        0x01,                    // DATA
        0x00, 0x00, 0x00, 0x01,  // link_id 1
        0x00, 0x02,              // sender_id 2
        0x00,                    // key_epoch 0
        0x00, 0x00, 0x00, 0x00,  // seq 0
        0x00, 0x10,              // payload_len 16
        0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA,
        0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA,
    };
    CHECK(bytes == expected);
}

TEST_CASE("encode/decode are exact inverses on random valid frames") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const WireFrame f = random_valid_frame(rng);
        auto encoded = encode_frame(f);
        REQUIRE(std::holds_alternative<byte_vec>(encoded));
        auto decoded = decode_frame(std::get<byte_vec>(encoded));
        REQUIRE(decoded.ok());
        CHECK(*decoded.frame == f);
    }
}

TEST_CASE("encode rejects invariant violations") {
    WireFrame f = make_data_frame(1, 1, 0, 0, byte_vec(15, 0));
    auto r = encode_frame(f);
    REQUIRE(std::holds_alternative<EncodeError>(r));
    CHECK(std::get<EncodeError>(r) == EncodeError::DataNotBlockAligned);

    f.payload.assign(70000, 0);
    CHECK(std::get<EncodeError>(encode_frame(f)) == EncodeError::PayloadTooLong);

    WireFrame ts;
    ts.msg_type = MsgType::Ts;
    ts.payload.assign(7, 0);
    CHECK(std::get<EncodeError>(encode_frame(ts)) == EncodeError::BadTsPayload);

    WireFrame ke;
    ke.msg_type = MsgType::KeInit;
    CHECK(std::get<EncodeError>(encode_frame(ke)) == EncodeError::EmptyKePayload);
}

TEST_CASE("decode rejects malformed buffers with reason codes") {
    WireFrame f = make_data_frame(7, 1, 3, 42, byte_vec(16, 0x11));
    byte_vec good = std::get<byte_vec>(encode_frame(f));

    byte_vec bad_magic = good;
    bad_magic[0] ^= 0xFF;
    CHECK(decode_frame(bad_magic).error == DecodeError::BadMagic);

    byte_vec bad_version = good;
    bad_version[2] = 0x02;
    CHECK(decode_frame(bad_version).error == DecodeError::BadVersion);

    byte_vec bad_type = good;
    bad_type[3] = 0x09;
    CHECK(decode_frame(bad_type).error == DecodeError::BadType);

    // declared payload_len larger than the buffer
    byte_vec truncated = good;
    truncated[16] = 0x20;
    CHECK(decode_frame(truncated).error == DecodeError::Truncated);

    byte_vec short_buf(good.begin(), good.begin() + 10);
    CHECK(decode_frame(short_buf).error == DecodeError::Truncated);

    byte_vec trailing = good;
    trailing.push_back(0x00);
    CHECK(decode_frame(trailing).error == DecodeError::BadLength);

    // DATA payload not a block multiple (patch length fields consistently)
    byte_vec misaligned = good;
    misaligned[16] = 15;
    misaligned.pop_back();
    CHECK(decode_frame(misaligned).error == DecodeError::BadLength);

    CHECK(decode_frame(good).ok());
}

TEST_CASE("timestamp frames carry milliseconds big-endian") {
    const std::uint64_t t = 0x0102030405060708ull;
    WireFrame f = make_ts_frame(3, 1, 9, t);
    CHECK(f.payload.size() == 8);
    CHECK(ts_payload_millis(f) == t);
    auto encoded = std::get<byte_vec>(encode_frame(f));
    CHECK(encoded[17] == 0x01);
    CHECK(encoded[24] == 0x08);
}
