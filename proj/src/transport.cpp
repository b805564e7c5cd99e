#include "fbsec/transport.hpp"

#include <algorithm>
#include <cmath>

namespace fbsec::net {

std::optional<ChannelId> parse_channel_id(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size()) return std::nullopt;
    ChannelId id;
    id.group = text.substr(0, colon);
    unsigned long port = 0;
    try {
        std::size_t used = 0;
        port = std::stoul(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) return std::nullopt;
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (port == 0 || port > 65535) return std::nullopt;
    id.port = static_cast<std::uint16_t>(port);
    return id;
}

LoopbackNetwork::LoopbackNetwork(std::shared_ptr<VirtualClock> clock, LatencyModel model,
                                 std::uint64_t jitter_seed)
    : clock_(std::move(clock)), model_(model), jitter_rng_(jitter_seed) {}

void LoopbackNetwork::open(const ChannelId& ch) {
    channels_[ch].open = true;
}

void LoopbackNetwork::close(const ChannelId& ch) {
    auto it = channels_.find(ch);
    if (it != channels_.end()) it->second.open = false;
}

bool LoopbackNetwork::matches(const SubscriptionSpec& spec, const WireFrame& f) const {
    if (!spec.accept.empty() && !spec.accept.count(f.msg_type)) return false;
    if (spec.link_filter && *spec.link_filter != f.link_id) return false;
    return true;
}

void LoopbackNetwork::publish(const ChannelId& ch, const WireFrame& frame) {
    auto it = channels_.find(ch);
    if (it == channels_.end() || !it->second.open)
        throw ChannelFault("publish on closed channel " + ch.str());
    Channel& channel = it->second;
    channel.stats.sent++;

    double latency = model_.base_for(frame.link_id);
    if (model_.jitter_ms > 0) {
        std::uniform_real_distribution<double> dist(0.0, model_.jitter_ms);
        latency += dist(jitter_rng_);
    }
    const std::uint64_t delay = static_cast<std::uint64_t>(std::llround(latency));

    // sent = received + dropped: a publish counts as received once when at
    // least one subscription wanted it, regardless of fan-out.
    bool any = false;
    for (auto& [id, spec] : channel.subs) {
        if (!matches(spec, frame)) continue;
        any = true;
        if (delay == 0) {
            spec.sink(frame);  // synchronous, subscription order
        } else {
            pending_.push_back({clock_->now_ms() + delay, next_order_++, spec.sink, frame});
        }
    }
    if (any)
        channel.stats.received++;
    else
        channel.stats.dropped++;
}

SubId LoopbackNetwork::subscribe(const ChannelId& ch, SubscriptionSpec spec) {
    auto it = channels_.find(ch);
    if (it == channels_.end() || !it->second.open)
        throw ChannelFault("subscribe on closed channel " + ch.str());
    for (const auto& [id, existing] : it->second.subs)
        if (existing.owner == spec.owner)
            throw ChannelFault("instance '" + spec.owner + "' already subscribed to " + ch.str());
    const SubId id = next_sub_++;
    it->second.subs.emplace_back(id, std::move(spec));
    return id;
}

void LoopbackNetwork::unsubscribe(SubId id) {
    for (auto& [ch, channel] : channels_) {
        auto& subs = channel.subs;
        subs.erase(std::remove_if(subs.begin(), subs.end(),
                                  [&](const auto& pair) { return pair.first == id; }),
                   subs.end());
    }
}

ChannelStats LoopbackNetwork::stats(const ChannelId& ch) const {
    auto it = channels_.find(ch);
    return it == channels_.end() ? ChannelStats{} : it->second.stats;
}

std::optional<std::uint64_t> LoopbackNetwork::next_due() const {
    std::optional<std::uint64_t> due;
    for (const auto& p : pending_)
        if (!due || p.due < *due) due = p.due;
    return due;
}

void LoopbackNetwork::deliver_due(std::uint64_t now) {
    std::vector<Pending> due;
    pending_.erase(std::remove_if(pending_.begin(), pending_.end(),
                                  [&](Pending& p) {
                                      if (p.due <= now) {
                                          due.push_back(std::move(p));
                                          return true;
                                      }
                                      return false;
                                  }),
                   pending_.end());
    std::sort(due.begin(), due.end(), [](const Pending& a, const Pending& b) {
        return a.due != b.due ? a.due < b.due : a.order < b.order;
    });
    for (auto& p : due) p.sink(p.frame);
}

}  // namespace fbsec::net
