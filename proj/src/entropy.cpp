#include "fbsec/entropy.hpp"

#include <cstdio>
#include <mutex>

namespace fbsec::crypto {

void SystemEntropy::fill(std::span<std::uint8_t> out) {
    static std::mutex mu;
    std::lock_guard lock(mu);

    if (std::FILE* f = std::fopen("/dev/urandom", "rb")) {
        const std::size_t got = std::fread(out.data(), 1, out.size(), f);
        std::fclose(f);
        if (got == out.size()) return;
    }
    try {
        std::random_device rd;
        for (auto& b : out) b = static_cast<std::uint8_t>(rd());
    } catch (const std::exception& e) {
        throw EntropyError(std::string("platform RNG failure: ") + e.what());
    }
}

void SeededEntropy::fill(std::span<std::uint8_t> out) {
    std::lock_guard lock(mu_);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng_());
}

}  // namespace fbsec::crypto
