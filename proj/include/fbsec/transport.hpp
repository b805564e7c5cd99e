#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbsec/clock.hpp"
#include "fbsec/frame.hpp"

namespace fbsec::net {

/// Multicast group address plus port; rendered as "239.0.0.1:61000".
struct ChannelId {
    std::string group;
    std::uint16_t port = 0;

    std::string str() const { return group + ":" + std::to_string(port); }
    bool operator==(const ChannelId&) const = default;
    auto operator<=>(const ChannelId&) const = default;
};

std::optional<ChannelId> parse_channel_id(const std::string& text);

struct ChannelStats {
    std::uint64_t sent = 0;
    std::uint64_t received = 0;      // deliveries into subscriber sinks
    std::uint64_t dropped = 0;       // frames no subscription wanted
    std::uint64_t decode_errors = 0;
};

struct ChannelFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Delivery callback; loopback invokes it on the simulation driver thread,
/// UDP transport from a receiver thread. Implementations hand the frame to
/// the owning device queue, which is the thread-safety boundary.
using FrameSink = std::function<void(const WireFrame&)>;

struct SubscriptionSpec {
    std::string owner;                       // instance path; unique per channel
    std::set<MsgType> accept;                // empty = all types
    std::optional<std::uint32_t> link_filter;  // nullopt = all links
    FrameSink sink;
};

using SubId = std::uint64_t;

class Transport {
public:
    virtual ~Transport() = default;

    virtual void open(const ChannelId& ch) = 0;
    virtual void close(const ChannelId& ch) = 0;

    /// Datagram semantics: no retransmission, no delivery guarantee.
    /// Throws ChannelFault when the channel is not open.
    virtual void publish(const ChannelId& ch, const WireFrame& frame) = 0;

    /// Throws ChannelFault on a closed channel or a duplicate subscription
    /// by the same owner.
    virtual SubId subscribe(const ChannelId& ch, SubscriptionSpec spec) = 0;
    virtual void unsubscribe(SubId id) = 0;

    virtual ChannelStats stats(const ChannelId& ch) const = 0;
};

/// Network latency model for the loopback fabric. Jitter draws are uniform
/// in [0, jitter_ms] from a seeded generator, so a fixed seed reproduces the
/// exact delivery schedule.
struct LatencyModel {
    double fixed_ms = 0.0;
    std::map<std::uint32_t, double> per_link_ms;  // overrides fixed_ms per link id
    double jitter_ms = 0.0;

    double base_for(std::uint32_t link) const {
        auto it = per_link_ms.find(link);
        return it == per_link_ms.end() ? fixed_ms : it->second;
    }
};

/// Deterministic in-process fabric. Zero-latency publishes deliver
/// synchronously in subscription order; positive latencies are scheduled
/// against the virtual clock and released by deliver_due().
class LoopbackNetwork final : public Transport {
public:
    LoopbackNetwork(std::shared_ptr<VirtualClock> clock, LatencyModel model = {},
                    std::uint64_t jitter_seed = 0);

    void open(const ChannelId& ch) override;
    void close(const ChannelId& ch) override;
    void publish(const ChannelId& ch, const WireFrame& frame) override;
    SubId subscribe(const ChannelId& ch, SubscriptionSpec spec) override;
    void unsubscribe(SubId id) override;
    ChannelStats stats(const ChannelId& ch) const override;

    /// Earliest pending delivery time, if any.
    std::optional<std::uint64_t> next_due() const;

    /// Releases every delivery due at or before `now`, in (due, publish
    /// order) order.
    void deliver_due(std::uint64_t now);

private:
    struct Channel {
        bool open = false;
        ChannelStats stats;
        std::vector<std::pair<SubId, SubscriptionSpec>> subs;  // subscription order
    };

    struct Pending {
        std::uint64_t due;
        std::uint64_t order;
        FrameSink sink;
        WireFrame frame;
    };

    bool matches(const SubscriptionSpec& spec, const WireFrame& f) const;

    std::shared_ptr<VirtualClock> clock_;
    LatencyModel model_;
    std::mt19937_64 jitter_rng_;
    std::map<ChannelId, Channel> channels_;
    std::vector<Pending> pending_;  // kept sorted lazily via min-scan
    SubId next_sub_ = 1;
    std::uint64_t next_order_ = 0;
};

}  // namespace fbsec::net
