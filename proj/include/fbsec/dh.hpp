#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "fbsec/aes.hpp"
#include "fbsec/bytes.hpp"
#include "fbsec/entropy.hpp"

namespace fbsec::crypto {

using BigInt = boost::multiprecision::cpp_int;

/// Raised on out-of-range peer values or malformed key-exchange payloads;
/// both are treated as possible tampering.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DhGroup {
    BigInt prime;      // odd
    BigInt generator;  // 2 <= g < p

    bool operator==(const DhGroup&) const = default;
};

/// 2048-bit MODP group (RFC 3526 group 14). Default for live exchanges.
const DhGroup& modp2048_group();

/// p=23, g=5. Small enough to brute-force; tests only.
const DhGroup& toy_group();

struct DhKeyPair {
    BigInt private_value;  // in [2, p-2]
    BigInt public_value;   // g^private mod p
};

DhKeyPair dh_keypair(const DhGroup& group, EntropySource& rng);

/// peer_public^private mod p. Rejects peer values outside (1, p-1) with
/// ProtocolError before any arithmetic.
BigInt dh_shared_secret(const BigInt& private_value, const BigInt& peer_public, const DhGroup& group);

byte_vec bigint_to_bytes(const BigInt& v);          // minimal big-endian, empty for 0
BigInt bigint_from_bytes(std::span<const std::uint8_t> bytes);

/// Symmetric key derived from a shared secret plus the (link, epoch) context.
struct SessionKey {
    byte_vec key;                    // key_bytes(ksize) long
    std::uint8_t epoch = 0;          // wraps mod 256 on rekey
    std::uint64_t established_at = 0;  // milliseconds

    bool operator==(const SessionKey&) const = default;
};

/// key = first key_bytes(ksize) bytes of SHA-256(secret_be || link_id_be32 || epoch).
SessionKey derive_session_key(const BigInt& secret, KeySize ksize, std::uint32_t link_id,
                              std::uint8_t epoch, std::uint64_t established_at = 0);

}  // namespace fbsec::crypto
