#include "fbsec/dh.hpp"

#include "fbsec/sha256.hpp"

namespace fbsec::crypto {

namespace {

// RFC 3526, section 3.
constexpr const char* kModp2048Hex =
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

}  // namespace

const DhGroup& modp2048_group() {
    static const DhGroup group = [] {
        DhGroup g;
        g.prime = BigInt(std::string("0x") + kModp2048Hex);
        g.generator = 2;
        return g;
    }();
    return group;
}

const DhGroup& toy_group() {
    static const DhGroup group{BigInt(23), BigInt(5)};
    return group;
}

byte_vec bigint_to_bytes(const BigInt& v) {
    byte_vec out;
    if (v == 0) return out;
    export_bits(v, std::back_inserter(out), 8);
    return out;
}

BigInt bigint_from_bytes(std::span<const std::uint8_t> bytes) {
    BigInt v = 0;
    for (auto b : bytes) v = (v << 8) | b;
    return v;
}

DhKeyPair dh_keypair(const DhGroup& group, EntropySource& rng) {
    if (group.prime < 5 || group.generator < 2 || group.generator >= group.prime)
        throw std::invalid_argument("malformed DH group");

    // Uniform private in [2, p-2] by rejection sampling over the byte width of p.
    const std::size_t nbytes = bigint_to_bytes(group.prime).size();
    const BigInt lo = 2;
    const BigInt hi = group.prime - 2;
    byte_vec buf(nbytes);
    BigInt priv;
    do {
        rng.fill(buf);
        priv = bigint_from_bytes(buf);
    } while (priv < lo || priv > hi);

    DhKeyPair pair;
    pair.private_value = priv;
    pair.public_value = boost::multiprecision::powm(group.generator, priv, group.prime);
    return pair;
}

BigInt dh_shared_secret(const BigInt& private_value, const BigInt& peer_public, const DhGroup& group) {
    if (peer_public <= 1 || peer_public >= group.prime)
        throw ProtocolError("peer public value out of range");
    return boost::multiprecision::powm(peer_public, private_value, group.prime);
}

SessionKey derive_session_key(const BigInt& secret, KeySize ksize, std::uint32_t link_id,
                              std::uint8_t epoch, std::uint64_t established_at) {
    if (secret <= 0) throw std::invalid_argument("shared secret must be positive");

    byte_vec material = bigint_to_bytes(secret);
    put_be32(material, link_id);
    material.push_back(epoch);
    const Sha256Digest digest = sha256(material);

    SessionKey sk;
    sk.key.assign(digest.begin(), digest.begin() + key_bytes(ksize));
    sk.epoch = epoch;
    sk.established_at = established_at;
    return sk;
}

}  // namespace fbsec::crypto
