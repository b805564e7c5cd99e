#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>

namespace fbsec::crypto {

/// Raised when the platform entropy source cannot deliver bytes.
struct EntropyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Injectable randomness so simulations can run fully deterministic.
/// Implementations must be safe for concurrent draws.
class EntropySource {
public:
    virtual ~EntropySource() = default;
    virtual void fill(std::span<std::uint8_t> out) = 0;

    std::uint8_t byte() {
        std::uint8_t b;
        fill({&b, 1});
        return b;
    }
    std::uint64_t u64() {
        std::uint8_t b[8];
        fill(b);
        std::uint64_t v = 0;
        for (auto x : b) v = (v << 8) | x;
        return v;
    }
};

/// OS entropy (/dev/urandom, falling back to std::random_device).
class SystemEntropy final : public EntropySource {
public:
    void fill(std::span<std::uint8_t> out) override;
};

/// Deterministic stream seeded from a 64-bit value; test use only.
class SeededEntropy final : public EntropySource {
public:
    explicit SeededEntropy(std::uint64_t seed) : rng_(seed) {}
    void fill(std::span<std::uint8_t> out) override;

private:
    std::mutex mu_;
    std::mt19937_64 rng_;
};

}  // namespace fbsec::crypto
