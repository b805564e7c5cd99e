#pragma once

#include <memory>
#include <vector>

#include "fbsec/runtime.hpp"

namespace fbsec::rt {

/// Steps a set of device runtimes against one shared virtual clock and an
/// optional loopback fabric. Deterministic: devices are stepped round-robin
/// in registration order, and time only advances when every queue is idle.
class SimDriver {
public:
    SimDriver(std::shared_ptr<VirtualClock> clock, net::LoopbackNetwork* fabric)
        : clock_(std::move(clock)), fabric_(fabric) {}

    void add(DeviceRuntime* rt) { devices_.push_back(rt); }

    /// INIT every instance on every device, settle, then START; subscriptions
    /// therefore exist before any key exchange begins.
    void boot() {
        for (auto* dev : devices_) dev->boot_init();
        run_all_idle();
        for (auto* dev : devices_) dev->boot_start();
        run_all_idle();
    }

    /// Throws after kSettleCap total steps: a cross-device event loop would
    /// otherwise spin the simulation forever.
    void run_all_idle() {
        static constexpr std::uint64_t kSettleCap = 10'000'000;
        std::uint64_t steps = 0;
        bool progress = true;
        while (progress) {
            progress = false;
            for (auto* dev : devices_) {
                if (dev->step()) {
                    progress = true;
                    if (++steps > kSettleCap)
                        throw std::runtime_error(
                            "simulation did not settle; the network likely contains a "
                            "cross-device event loop");
                }
            }
        }
    }

    /// Advances virtual time to t_end, releasing deliveries and timers in
    /// due order, running every device to idle in between.
    void run_until(std::uint64_t t_end) {
        for (;;) {
            run_all_idle();
            std::optional<std::uint64_t> next;
            if (fabric_) next = fabric_->next_due();
            for (auto* dev : devices_) {
                if (auto due = dev->next_timer_due())
                    if (!next || *due < *next) next = due;
            }
            if (!next || *next > t_end) break;
            clock_->advance_to(*next);
            if (fabric_) fabric_->deliver_due(clock_->now_ms());
            for (auto* dev : devices_) dev->fire_timers_due(clock_->now_ms());
        }
        clock_->advance_to(t_end);
        if (fabric_) fabric_->deliver_due(clock_->now_ms());
        for (auto* dev : devices_) dev->fire_timers_due(clock_->now_ms());
        run_all_idle();
    }

    std::uint64_t now() const { return clock_->now_ms(); }

private:
    std::shared_ptr<VirtualClock> clock_;
    net::LoopbackNetwork* fabric_;
    std::vector<DeviceRuntime*> devices_;
};

}  // namespace fbsec::rt
