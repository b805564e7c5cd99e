#pragma once

#include <atomic>
#include <memory>
#include <thread>

#include "fbsec/transport.hpp"

namespace fbsec::net {

/// IPv4 UDP multicast transport, TTL 1, loop enabled so co-hosted devices
/// still hear each other. One receiver thread per open channel feeds decoded
/// frames through the matching subscriptions.
class UdpTransport final : public Transport {
public:
    UdpTransport();
    ~UdpTransport() override;

    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;

    void open(const ChannelId& ch) override;
    void close(const ChannelId& ch) override;
    void publish(const ChannelId& ch, const WireFrame& frame) override;
    SubId subscribe(const ChannelId& ch, SubscriptionSpec spec) override;
    void unsubscribe(SubId id) override;
    ChannelStats stats(const ChannelId& ch) const override;

    /// True when the host allows multicast sockets; lets callers and tests
    /// degrade gracefully inside restricted sandboxes.
    static bool available();

private:
    struct ChannelState;
    void receive_loop(ChannelState* state);

    mutable std::mutex mu_;
    int send_fd_ = -1;
    std::map<ChannelId, std::unique_ptr<ChannelState>> channels_;
    SubId next_sub_ = 1;
};

}  // namespace fbsec::net
