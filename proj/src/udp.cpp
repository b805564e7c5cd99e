#include "fbsec/udp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <vector>

namespace fbsec::net {

struct UdpTransport::ChannelState {
    ChannelId id;
    int recv_fd = -1;
    std::atomic<bool> running{false};
    std::thread receiver;
    ChannelStats stats;
    std::vector<std::pair<SubId, SubscriptionSpec>> subs;
    std::mutex sub_mu;
};

namespace {

int make_send_socket() {
    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) return -1;
    const unsigned char ttl = 1;
    ::setsockopt(fd, IPPROTO_IP, IP_MULTICAST_TTL, &ttl, sizeof(ttl));
    const unsigned char loop = 1;
    ::setsockopt(fd, IPPROTO_IP, IP_MULTICAST_LOOP, &loop, sizeof(loop));
    return fd;
}

int make_recv_socket(const ChannelId& ch) {
    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) return -1;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(ch.port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(fd);
        return -1;
    }

    ip_mreq mreq{};
    if (::inet_pton(AF_INET, ch.group.c_str(), &mreq.imr_multiaddr) != 1) {
        ::close(fd);
        return -1;
    }
    mreq.imr_interface.s_addr = htonl(INADDR_ANY);
    if (::setsockopt(fd, IPPROTO_IP, IP_ADD_MEMBERSHIP, &mreq, sizeof(mreq)) < 0) {
        ::close(fd);
        return -1;
    }
    return fd;
}

}  // namespace

UdpTransport::UdpTransport() : send_fd_(make_send_socket()) {}

UdpTransport::~UdpTransport() {
    std::vector<std::unique_ptr<ChannelState>> to_stop;
    {
        std::lock_guard lock(mu_);
        for (auto& [id, state] : channels_) to_stop.push_back(std::move(state));
        channels_.clear();
    }
    for (auto& state : to_stop) {
        state->running = false;
        if (state->recv_fd >= 0) {
            ::shutdown(state->recv_fd, SHUT_RDWR);
            ::close(state->recv_fd);
        }
        if (state->receiver.joinable()) state->receiver.join();
    }
    if (send_fd_ >= 0) ::close(send_fd_);
}

bool UdpTransport::available() {
    int fd = make_send_socket();
    if (fd < 0) return false;
    ChannelId probe{"239.255.42.42", 56123};
    int rfd = make_recv_socket(probe);
    ::close(fd);
    if (rfd < 0) return false;
    ::close(rfd);
    return true;
}

void UdpTransport::open(const ChannelId& ch) {
    std::lock_guard lock(mu_);
    if (channels_.count(ch)) return;
    auto state = std::make_unique<ChannelState>();
    state->id = ch;
    state->recv_fd = make_recv_socket(ch);
    if (state->recv_fd < 0) throw ChannelFault("cannot open multicast channel " + ch.str());
    state->running = true;
    ChannelState* raw = state.get();
    state->receiver = std::thread([this, raw] { receive_loop(raw); });
    channels_[ch] = std::move(state);
}

void UdpTransport::close(const ChannelId& ch) {
    std::unique_ptr<ChannelState> state;
    {
        std::lock_guard lock(mu_);
        auto it = channels_.find(ch);
        if (it == channels_.end()) return;
        state = std::move(it->second);
        channels_.erase(it);
    }
    state->running = false;
    ::shutdown(state->recv_fd, SHUT_RDWR);
    ::close(state->recv_fd);
    if (state->receiver.joinable()) state->receiver.join();
}

void UdpTransport::publish(const ChannelId& ch, const WireFrame& frame) {
    {
        std::lock_guard lock(mu_);
        auto it = channels_.find(ch);
        if (it == channels_.end()) throw ChannelFault("publish on closed channel " + ch.str());
        it->second->stats.sent++;
    }
    auto encoded = encode_frame(frame);
    if (std::holds_alternative<EncodeError>(encoded))
        throw ChannelFault(std::string("frame rejected: ") +
                           encode_error_name(std::get<EncodeError>(encoded)));
    const auto& bytes = std::get<byte_vec>(encoded);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ch.port);
    if (::inet_pton(AF_INET, ch.group.c_str(), &addr.sin_addr) != 1)
        throw ChannelFault("bad multicast group " + ch.group);
    const auto sent = ::sendto(send_fd_, bytes.data(), bytes.size(), 0,
                               reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    if (sent < 0 || static_cast<std::size_t>(sent) != bytes.size())
        throw ChannelFault("sendto failed on " + ch.str());
}

SubId UdpTransport::subscribe(const ChannelId& ch, SubscriptionSpec spec) {
    std::lock_guard lock(mu_);
    auto it = channels_.find(ch);
    if (it == channels_.end()) throw ChannelFault("subscribe on closed channel " + ch.str());
    ChannelState* state = it->second.get();
    std::lock_guard sub_lock(state->sub_mu);
    for (const auto& [id, existing] : state->subs)
        if (existing.owner == spec.owner)
            throw ChannelFault("instance '" + spec.owner + "' already subscribed to " + ch.str());
    const SubId id = next_sub_++;
    state->subs.emplace_back(id, std::move(spec));
    return id;
}

void UdpTransport::unsubscribe(SubId id) {
    std::lock_guard lock(mu_);
    for (auto& [ch, state] : channels_) {
        std::lock_guard sub_lock(state->sub_mu);
        auto& subs = state->subs;
        subs.erase(std::remove_if(subs.begin(), subs.end(),
                                  [&](const auto& pair) { return pair.first == id; }),
                   subs.end());
    }
}

ChannelStats UdpTransport::stats(const ChannelId& ch) const {
    std::lock_guard lock(mu_);
    auto it = channels_.find(ch);
    return it == channels_.end() ? ChannelStats{} : it->second->stats;
}

void UdpTransport::receive_loop(ChannelState* state) {
    std::vector<std::uint8_t> buf(65536);
    while (state->running) {
        const auto n = ::recv(state->recv_fd, buf.data(), buf.size(), 0);
        if (n <= 0) {
            if (!state->running) break;
            continue;
        }
        auto decoded = decode_frame({buf.data(), static_cast<std::size_t>(n)});
        std::lock_guard sub_lock(state->sub_mu);
        if (!decoded.ok()) {
            state->stats.decode_errors++;
            continue;
        }
        bool any = false;
        for (auto& [id, spec] : state->subs) {
            if (!spec.accept.empty() && !spec.accept.count(decoded.frame->msg_type)) continue;
            if (spec.link_filter && *spec.link_filter != decoded.frame->link_id) continue;
            any = true;
            spec.sink(*decoded.frame);
        }
        if (any)
            state->stats.received++;
        else
            state->stats.dropped++;
    }
}

}  // namespace fbsec::net
