#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>

namespace fbsec {

enum class ClockMode { Virtual, Real };

/// Millisecond clock. Virtual clocks are driven by the simulation; real
/// clocks read wall time. now() is monotone non-decreasing within a run.
class Clock {
public:
    virtual ~Clock() = default;
    virtual ClockMode mode() const = 0;
    virtual std::uint64_t now_ms() const = 0;
};

class VirtualClock final : public Clock {
public:
    ClockMode mode() const override { return ClockMode::Virtual; }
    std::uint64_t now_ms() const override { return now_.load(std::memory_order_relaxed); }

    void advance_to(std::uint64_t t) {
        std::uint64_t cur = now_.load(std::memory_order_relaxed);
        while (t > cur && !now_.compare_exchange_weak(cur, t)) {
        }
    }

private:
    std::atomic<std::uint64_t> now_{0};
};

/// Wall clock in UNIX milliseconds, clamped so that reads never go backwards
/// even if the system clock steps.
class RealClock final : public Clock {
public:
    ClockMode mode() const override { return ClockMode::Real; }
    std::uint64_t now_ms() const override {
        const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count();
        std::uint64_t t = static_cast<std::uint64_t>(wall);
        std::uint64_t prev = last_.load(std::memory_order_relaxed);
        while (t > prev && !last_.compare_exchange_weak(prev, t)) {
        }
        return std::max(t, last_.load(std::memory_order_relaxed));
    }

private:
    mutable std::atomic<std::uint64_t> last_{0};
};

}  // namespace fbsec
