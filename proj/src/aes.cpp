#include "fbsec/aes.hpp"

namespace fbsec::crypto {

namespace {

// GF(2^8) helpers, reduction polynomial x^8 + x^4 + x^3 + x + 1.
constexpr std::uint8_t xtime(std::uint8_t a) {
    return static_cast<std::uint8_t>((a << 1) ^ ((a >> 7) * 0x1b));
}

constexpr std::uint8_t gmul(std::uint8_t a, std::uint8_t b) {
    std::uint8_t r = 0;
    while (b) {
        if (b & 1) r ^= a;
        a = xtime(a);
        b >>= 1;
    }
    return r;
}

constexpr std::uint8_t rotl8(std::uint8_t x, unsigned n) {
    return static_cast<std::uint8_t>((x << n) | (x >> (8 - n)));
}

// S-boxes are derived at compile time from the field inverse plus the affine
// map rather than transcribed, so the KAT suite is the only trust anchor.
struct SboxTables {
    std::array<std::uint8_t, 256> fwd{};
    std::array<std::uint8_t, 256> inv{};
};

constexpr SboxTables make_sboxes() {
    std::array<std::uint8_t, 256> field_inv{};
    for (unsigned i = 1; i < 256; ++i) {
        for (unsigned j = 1; j < 256; ++j) {
            if (gmul(static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(j)) == 1) {
                field_inv[i] = static_cast<std::uint8_t>(j);
                break;
            }
        }
    }
    SboxTables t;
    for (unsigned i = 0; i < 256; ++i) {
        const std::uint8_t b = field_inv[i];
        const std::uint8_t s =
            static_cast<std::uint8_t>(b ^ rotl8(b, 1) ^ rotl8(b, 2) ^ rotl8(b, 3) ^ rotl8(b, 4) ^ 0x63);
        t.fwd[i] = s;
        t.inv[s] = static_cast<std::uint8_t>(i);
    }
    return t;
}

constexpr SboxTables kSbox = make_sboxes();
static_assert(kSbox.fwd[0x00] == 0x63 && kSbox.fwd[0x53] == 0xed && kSbox.inv[0x63] == 0x00);

using State = std::array<std::uint8_t, 16>;  // column-major: state[4*c + r]

void add_round_key(State& s, const std::uint8_t* rk) {
    for (unsigned i = 0; i < 16; ++i) s[i] ^= rk[i];
}

void sub_bytes(State& s) {
    for (auto& b : s) b = kSbox.fwd[b];
}

void inv_sub_bytes(State& s) {
    for (auto& b : s) b = kSbox.inv[b];
}

void shift_rows(State& s) {
    State t = s;
    for (unsigned r = 1; r < 4; ++r)
        for (unsigned c = 0; c < 4; ++c) s[4 * c + r] = t[4 * ((c + r) % 4) + r];
}

void inv_shift_rows(State& s) {
    State t = s;
    for (unsigned r = 1; r < 4; ++r)
        for (unsigned c = 0; c < 4; ++c) s[4 * ((c + r) % 4) + r] = t[4 * c + r];
}

void mix_columns(State& s) {
    for (unsigned c = 0; c < 4; ++c) {
        std::uint8_t* col = &s[4 * c];
        const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
        col[0] = static_cast<std::uint8_t>(gmul(a0, 2) ^ gmul(a1, 3) ^ a2 ^ a3);
        col[1] = static_cast<std::uint8_t>(a0 ^ gmul(a1, 2) ^ gmul(a2, 3) ^ a3);
        col[2] = static_cast<std::uint8_t>(a0 ^ a1 ^ gmul(a2, 2) ^ gmul(a3, 3));
        col[3] = static_cast<std::uint8_t>(gmul(a0, 3) ^ a1 ^ a2 ^ gmul(a3, 2));
    }
}

void inv_mix_columns(State& s) {
    for (unsigned c = 0; c < 4; ++c) {
        std::uint8_t* col = &s[4 * c];
        const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
        col[0] = static_cast<std::uint8_t>(gmul(a0, 14) ^ gmul(a1, 11) ^ gmul(a2, 13) ^ gmul(a3, 9));
        col[1] = static_cast<std::uint8_t>(gmul(a0, 9) ^ gmul(a1, 14) ^ gmul(a2, 11) ^ gmul(a3, 13));
        col[2] = static_cast<std::uint8_t>(gmul(a0, 13) ^ gmul(a1, 9) ^ gmul(a2, 14) ^ gmul(a3, 11));
        col[3] = static_cast<std::uint8_t>(gmul(a0, 11) ^ gmul(a1, 13) ^ gmul(a2, 9) ^ gmul(a3, 14));
    }
}

}  // namespace

KeySize key_size_from_bits(unsigned bits) {
    switch (bits) {
        case 128: return KeySize::Bits128;
        case 192: return KeySize::Bits192;
        case 256: return KeySize::Bits256;
    }
    throw std::invalid_argument("AES key size must be 128, 192 or 256 bits");
}

KeySchedule aes_key_expansion(std::span<const std::uint8_t> key, KeySize ksize) {
    const unsigned nk = key_bytes(ksize) / 4;
    const unsigned nr = rounds(ksize);
    if (key.size() != key_bytes(ksize))
        throw std::invalid_argument("key length does not match requested key size");

    KeySchedule sched;
    sched.ksize = ksize;
    sched.expanded.assign(key.begin(), key.end());
    sched.expanded.resize(16 * (nr + 1));

    std::uint8_t rcon = 1;
    for (unsigned i = nk; i < 4 * (nr + 1); ++i) {
        std::uint8_t w[4];
        std::copy_n(&sched.expanded[4 * (i - 1)], 4, w);
        if (i % nk == 0) {
            const std::uint8_t t = w[0];
            w[0] = static_cast<std::uint8_t>(kSbox.fwd[w[1]] ^ rcon);
            w[1] = kSbox.fwd[w[2]];
            w[2] = kSbox.fwd[w[3]];
            w[3] = kSbox.fwd[t];
            rcon = xtime(rcon);
        } else if (nk > 6 && i % nk == 4) {
            for (auto& b : w) b = kSbox.fwd[b];
        }
        for (unsigned j = 0; j < 4; ++j)
            sched.expanded[4 * i + j] = static_cast<std::uint8_t>(sched.expanded[4 * (i - nk) + j] ^ w[j]);
    }
    return sched;
}

KeySchedule key_schedule_from_expanded(std::span<const std::uint8_t> expanded) {
    KeySchedule sched;
    switch (expanded.size()) {
        case 176: sched.ksize = KeySize::Bits128; break;
        case 208: sched.ksize = KeySize::Bits192; break;
        case 240: sched.ksize = KeySize::Bits256; break;
        default: throw std::invalid_argument("expanded key must be 176, 208 or 240 bytes");
    }
    sched.expanded.assign(expanded.begin(), expanded.end());
    return sched;
}

Block16 aes_encrypt_block(const Block16& pt, const KeySchedule& sched) {
    const unsigned nr = rounds(sched.ksize);
    if (sched.expanded.size() != 16 * (nr + 1))
        throw std::invalid_argument("key schedule length is inconsistent");

    State s = pt;
    add_round_key(s, &sched.expanded[0]);
    for (unsigned round = 1; round < nr; ++round) {
        sub_bytes(s);
        shift_rows(s);
        mix_columns(s);
        add_round_key(s, &sched.expanded[16 * round]);
    }
    sub_bytes(s);
    shift_rows(s);
    add_round_key(s, &sched.expanded[16 * nr]);
    return s;
}

Block16 aes_decrypt_block(const Block16& ct, const KeySchedule& sched) {
    const unsigned nr = rounds(sched.ksize);
    if (sched.expanded.size() != 16 * (nr + 1))
        throw std::invalid_argument("key schedule length is inconsistent");

    State s = ct;
    add_round_key(s, &sched.expanded[16 * nr]);
    for (unsigned round = nr - 1; round >= 1; --round) {
        inv_shift_rows(s);
        inv_sub_bytes(s);
        add_round_key(s, &sched.expanded[16 * round]);
        inv_mix_columns(s);
    }
    inv_shift_rows(s);
    inv_sub_bytes(s);
    add_round_key(s, &sched.expanded[0]);
    return s;
}

byte_vec aes_encrypt(std::span<const std::uint8_t> pt, const KeySchedule& sched, CipherMode mode) {
    (void)mode;  // Ecb is the only member
    if (pt.size() % 16 != 0) throw std::invalid_argument("plaintext must be whole 16-byte blocks");
    byte_vec out(pt.size());
    for (std::size_t off = 0; off < pt.size(); off += 16) {
        Block16 b;
        std::copy_n(pt.begin() + off, 16, b.begin());
        b = aes_encrypt_block(b, sched);
        std::copy(b.begin(), b.end(), out.begin() + off);
    }
    return out;
}

byte_vec aes_decrypt(std::span<const std::uint8_t> ct, const KeySchedule& sched, CipherMode mode) {
    (void)mode;
    if (ct.size() % 16 != 0) throw std::invalid_argument("ciphertext must be whole 16-byte blocks");
    byte_vec out(ct.size());
    for (std::size_t off = 0; off < ct.size(); off += 16) {
        Block16 b;
        std::copy_n(ct.begin() + off, 16, b.begin());
        b = aes_decrypt_block(b, sched);
        std::copy(b.begin(), b.end(), out.begin() + off);
    }
    return out;
}

}  // namespace fbsec::crypto
