#include "fbsec/services.hpp"

#include <algorithm>
#include <cmath>

#include "fbsec/aes.hpp"

namespace fbsec::rt {

namespace {

// ---------------------------------------------------------------------------
// Value helpers
// ---------------------------------------------------------------------------

std::uint64_t as_uint(const Value& v, const char* what) {
    if (const auto* u = std::get_if<std::uint64_t>(&v)) return *u;
    throw AlgorithmError(std::string("expected UINT for ") + what);
}

std::uint32_t as_u32(const Value& v, const char* what) {
    const std::uint64_t u = as_uint(v, what);
    if (u > 0xffffffffull) throw AlgorithmError(std::string(what) + " exceeds 32 bits");
    return static_cast<std::uint32_t>(u);
}

std::uint16_t as_u16(const Value& v, const char* what) {
    const std::uint64_t u = as_uint(v, what);
    if (u > 0xffffull) throw AlgorithmError(std::string(what) + " exceeds 16 bits");
    return static_cast<std::uint16_t>(u);
}

std::uint8_t as_u8(const Value& v, const char* what) {
    const std::uint64_t u = as_uint(v, what);
    if (u > 0xffull) throw AlgorithmError(std::string(what) + " exceeds 8 bits");
    return static_cast<std::uint8_t>(u);
}

double as_lreal(const Value& v, const char* what) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw AlgorithmError(std::string("expected LREAL for ") + what);
}

bool as_bool(const Value& v, const char* what) {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw AlgorithmError(std::string("expected BOOL for ") + what);
}

std::string as_string(const Value& v, const char* what) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw AlgorithmError(std::string("expected STRING for ") + what);
}

Block16 as_block(const Value& v, const char* what) {
    if (const auto* b = std::get_if<Block16>(&v)) return *b;
    throw AlgorithmError(std::string("expected BYTES16 for ") + what);
}

net::ChannelId channel_of(const Value& v, const char* what) {
    auto id = net::parse_channel_id(as_string(v, what));
    if (!id) throw AlgorithmError(std::string("malformed channel id in ") + what);
    return *id;
}

crypto::KeySchedule schedule_from_hex(const std::string& hex) {
    byte_vec bytes;
    try {
        bytes = from_hex(hex);
    } catch (const std::exception&) {
        throw AlgorithmError("expanded key is not valid hex");
    }
    return crypto::key_schedule_from_expanded(bytes);
}

// ---------------------------------------------------------------------------
// Standard algorithms (basic FB bodies)
// ---------------------------------------------------------------------------

void alg_aes_key_expand(AlgorithmContext& ctx) {
    const std::string key_hex = as_string(ctx.in("KEY"), "KEY");
    const auto bits = as_uint(ctx.in("KSIZE"), "KSIZE");
    const auto ksize = crypto::key_size_from_bits(static_cast<unsigned>(bits));
    byte_vec key;
    try {
        key = from_hex(key_hex);
    } catch (const std::exception&) {
        throw AlgorithmError("session key is not valid hex");
    }
    auto sched = crypto::aes_key_expansion(key, ksize);
    ctx.write("EXPKEY", to_hex(sched.expanded));
    ctx.write("EPOUT", ctx.in("EPIN"));
}

void alg_aes_encrypt_block(AlgorithmContext& ctx) {
    auto sched = schedule_from_hex(as_string(ctx.in("EXPKEY"), "EXPKEY"));
    ctx.write("CT", crypto::aes_encrypt_block(as_block(ctx.in("PT"), "PT"), sched));
    ctx.write("EPOUT", ctx.in("EPIN"));
}

void alg_aes_decrypt_block(AlgorithmContext& ctx) {
    auto sched = schedule_from_hex(as_string(ctx.in("EXPKEY"), "EXPKEY"));
    ctx.write("PT", crypto::aes_decrypt_block(as_block(ctx.in("CT"), "CT"), sched));
}

void alg_count_drop(AlgorithmContext& ctx) {
    ctx.write("DROPS", as_uint(ctx.out("DROPS"), "DROPS") + 1);
}

void alg_keystore_put(AlgorithmContext& ctx) {
    const std::string key = as_string(ctx.in("KEYIN"), "KEYIN");
    const std::uint64_t epoch = as_uint(ctx.in("EPIN"), "EPIN");
    const std::string cur = as_string(ctx.internal("CURK"), "CURK");
    const std::uint64_t cur_epoch = as_uint(ctx.internal("CURE"), "CURE");
    if (!cur.empty() && epoch == cur_epoch) {
        ctx.write("CURK", key);  // idempotent re-delivery of the same epoch
        return;
    }
    ctx.write("PREVK", cur);
    ctx.write("PREVE", cur_epoch);
    ctx.write("CURK", key);
    ctx.write("CURE", epoch);
}

void alg_keystore_get(AlgorithmContext& ctx) {
    const std::uint64_t want = as_uint(ctx.in("WANT"), "WANT");
    const std::string cur = as_string(ctx.internal("CURK"), "CURK");
    const std::string prev = as_string(ctx.internal("PREVK"), "PREVK");
    if (!cur.empty() && want == as_uint(ctx.internal("CURE"), "CURE")) {
        ctx.write("KEYOUT", cur);
        ctx.write("FOUND", true);
        return;
    }
    if (!prev.empty() && want == as_uint(ctx.internal("PREVE"), "PREVE")) {
        ctx.write("KEYOUT", prev);
        ctx.write("FOUND", true);
        return;
    }
    ctx.write("FOUND", false);
    ctx.write("MISSES", as_uint(ctx.out("MISSES"), "MISSES") + 1);
}

void alg_counter_next(AlgorithmContext& ctx) {
    const std::uint64_t n = as_uint(ctx.internal("N"), "N");
    ctx.write("SEQ", n);
    ctx.write("N", n + 1);
}

void alg_relay_copy(AlgorithmContext& ctx) {
    ctx.write("OUT", as_bool(ctx.in("IN"), "IN"));
}

void alg_set_trip(AlgorithmContext& ctx) { ctx.write("TRIP", true); }
void alg_clear_trip(AlgorithmContext& ctx) { ctx.write("TRIP", false); }

void alg_differential_eval(AlgorithmContext& ctx) {
    const double i1 = as_lreal(ctx.in("I1"), "I1");
    const double i2 = as_lreal(ctx.in("I2"), "I2");
    const double thresh = as_lreal(ctx.in("THRESH"), "THRESH");
    ctx.write("TRIP", std::fabs(i1 - i2) > thresh);
}

void alg_breaker_eval(AlgorithmContext& ctx) {
    const bool open = as_bool(ctx.out("OPEN"), "OPEN") || as_bool(ctx.in("T_OC"), "T_OC") ||
                      as_bool(ctx.in("T_DP"), "T_DP") || as_bool(ctx.in("T_EF"), "T_EF");
    ctx.write("OPEN", open);
}

// ---------------------------------------------------------------------------
// Service implementations
// ---------------------------------------------------------------------------

class PublisherService final : public Service {
public:
    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event == "INIT") {
            channel_ = channel_of(ctx.in("ID"), "ID");
            ctx.open_channel(*channel_);
            ctx.emit("INITO");
            return;
        }
        if (event == "REQ") {
            if (!channel_) throw AlgorithmError("publisher used before INIT");
            const Block16 sd = as_block(ctx.in("SD"), "SD");
            auto frame = net::make_data_frame(as_u32(ctx.in("LINK"), "LINK"),
                                              as_u16(ctx.in("SENDER"), "SENDER"),
                                              as_u8(ctx.in("EPOCH"), "EPOCH"),
                                              as_u32(ctx.in("SEQ"), "SEQ"),
                                              byte_vec(sd.begin(), sd.end()));
            ctx.publish(*channel_, frame);
            ctx.emit("CNF");
        }
    }

private:
    std::optional<net::ChannelId> channel_;
};

class TsPublisherService final : public Service {
public:
    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event == "INIT") {
            channel_ = channel_of(ctx.in("ID"), "ID");
            ctx.open_channel(*channel_);
            ctx.emit("INITO");
            return;
        }
        if (event == "REQ") {
            if (!channel_) throw AlgorithmError("timestamp publisher used before INIT");
            auto frame = net::make_ts_frame(as_u32(ctx.in("LINK"), "LINK"),
                                            as_u16(ctx.in("SENDER"), "SENDER"),
                                            as_u32(ctx.in("SEQ"), "SEQ"),
                                            as_uint(ctx.in("TSVAL"), "TSVAL"));
            ctx.publish(*channel_, frame);
            ctx.emit("CNF");
        }
    }

private:
    std::optional<net::ChannelId> channel_;
};

class SubscriberService final : public Service {
public:
    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event != "INIT") return;
        auto ch = channel_of(ctx.in("ID"), "ID");
        ctx.open_channel(ch);
        ctx.subscribe(ch, {net::MsgType::Data}, as_u32(ctx.in("LINK"), "LINK"));
        ctx.emit("INITO");
    }

    void on_frame(ServiceContext& ctx, const net::WireFrame& frame) override {
        if (frame.payload.size() != 16) {
            // multi-block payloads are not used by the boolean trip pipeline
            ctx.write("ERRS", as_uint(ctx.out("ERRS"), "ERRS") + 1);
            return;
        }
        Block16 ct;
        std::copy(frame.payload.begin(), frame.payload.end(), ct.begin());
        ctx.write("CT", ct);
        ctx.write("EPOCH", static_cast<std::uint64_t>(frame.key_epoch));
        ctx.write("SEQ", static_cast<std::uint64_t>(frame.seq));
        ctx.write("SENDER", static_cast<std::uint64_t>(frame.sender_id));
        ctx.emit("IND");
    }
};

class TsSubscriberService final : public Service {
public:
    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event != "INIT") return;
        auto ch = channel_of(ctx.in("ID"), "ID");
        ctx.open_channel(ch);
        ctx.subscribe(ch, {net::MsgType::Ts}, as_u32(ctx.in("LINK"), "LINK"));
        ctx.emit("INITO");
    }

    void on_frame(ServiceContext& ctx, const net::WireFrame& frame) override {
        ctx.write("TSVAL", net::ts_payload_millis(frame));
        ctx.write("SEQ", static_cast<std::uint64_t>(frame.seq));
        ctx.emit("IND");
    }
};

constexpr unsigned kKeMaxAttempts = 4;

/// Key-exchange SIFB. QI selects the role: true = initiator, false =
/// responder. INIT draws the keypair from the entropy pool and subscribes to
/// the KE channel; START and REQ both run an exchange (START is queued by
/// device boot once every subscription exists, REQ re-keys on E_CYCLE).
/// Initiators retry lost offers up to kKeMaxAttempts times, TMO apart.
class KexService final : public Service {
public:
    explicit KexService(const crypto::DhGroup& group) : group_(group) {}

    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event == "INIT") {
            initiator_ = as_bool(ctx.in("QI"), "QI");
            keypair_ = crypto::dh_keypair(group_, ctx.rng());
            channel_ = channel_of(ctx.in("ID"), "ID");
            link_ = as_u32(ctx.in("LINK"), "LINK");
            ksize_ = crypto::key_size_from_bits(static_cast<unsigned>(as_uint(ctx.in("KSIZE"), "KSIZE")));
            timeout_ms_ = as_uint(ctx.in("TMO"), "TMO");
            if (timeout_ms_ == 0) timeout_ms_ = 100;  // unbound TMO input
            ctx.open_channel(*channel_);
            ctx.subscribe(*channel_, {initiator_ ? net::MsgType::KeResp : net::MsgType::KeInit}, link_);
            ctx.write("STATUS", std::string("IDLE"));
            ctx.emit("INITO");
            return;
        }
        if (event == "START" || event == "REQ") {
            if (!keypair_) throw AlgorithmError("key exchange requested before INIT");
            if (initiator_) {
                pending_epoch_ = next_epoch_;
                attempts_ = 1;
                send_offer(ctx);
                ctx.schedule("__retry", timeout_ms_);
            } else {
                exchanged_ = false;
                ctx.schedule("__tmo", timeout_ms_);
            }
            return;
        }
        if (event == "__retry") {
            if (!pending_epoch_) return;
            if (attempts_ >= kKeMaxAttempts) {
                pending_epoch_.reset();
                ctx.write("STATUS", std::string("TIMEOUT"));
                return;
            }
            ++attempts_;
            send_offer(ctx);
            ctx.schedule("__retry", timeout_ms_);
            return;
        }
        if (event == "__tmo") {
            if (!exchanged_) ctx.write("STATUS", std::string("TIMEOUT"));
        }
    }

    void on_frame(ServiceContext& ctx, const net::WireFrame& frame) override {
        if (!keypair_) return;
        if (initiator_)
            complete_as_initiator(ctx, frame);
        else
            answer_as_responder(ctx, frame);
    }

private:
    void complete_as_initiator(ServiceContext& ctx, const net::WireFrame& frame) {
        if (!pending_epoch_ || frame.key_epoch != *pending_epoch_) return;  // stale response
        crypto::BigInt secret;
        if (!compute_secret(ctx, frame, secret)) {
            pending_epoch_.reset();
            ctx.cancel("__retry");
            return;
        }
        const std::uint8_t epoch = *pending_epoch_;
        pending_epoch_.reset();
        next_epoch_ = static_cast<std::uint8_t>(epoch + 1);  // wraps mod 256
        ctx.cancel("__retry");
        install_key(ctx, secret, epoch);
    }

    void answer_as_responder(ServiceContext& ctx, const net::WireFrame& frame) {
        crypto::BigInt secret;
        if (!compute_secret(ctx, frame, secret)) return;
        const std::uint8_t epoch = frame.key_epoch;

        net::WireFrame reply;
        reply.msg_type = net::MsgType::KeResp;
        reply.link_id = link_;
        reply.sender_id = 2;
        reply.key_epoch = epoch;
        reply.seq = frame.seq;
        reply.payload = crypto::bigint_to_bytes(keypair_->public_value);
        ctx.publish(*channel_, reply);

        exchanged_ = true;
        ctx.cancel("__tmo");
        install_key(ctx, secret, epoch);
    }

    bool compute_secret(ServiceContext& ctx, const net::WireFrame& frame, crypto::BigInt& secret) {
        if (frame.payload.empty()) {
            ctx.write("STATUS", std::string("PROTOCOL_ERROR"));
            return false;
        }
        try {
            secret = crypto::dh_shared_secret(keypair_->private_value,
                                              crypto::bigint_from_bytes(frame.payload), group_);
        } catch (const crypto::ProtocolError&) {
            ctx.write("STATUS", std::string("PROTOCOL_ERROR"));
            return false;
        }
        return true;
    }

    void install_key(ServiceContext& ctx, const crypto::BigInt& secret, std::uint8_t epoch) {
        auto key = crypto::derive_session_key(secret, ksize_, link_, epoch, ctx.clock().now_ms());
        ctx.write("KEY", to_hex(key.key));
        ctx.write("EPOCH", static_cast<std::uint64_t>(epoch));
        ctx.write("STATUS", std::string("ESTABLISHED"));
        ctx.emit("CNF");
    }

    void send_offer(ServiceContext& ctx) {
        net::WireFrame f;
        f.msg_type = net::MsgType::KeInit;
        f.link_id = link_;
        f.sender_id = 1;
        f.key_epoch = *pending_epoch_;
        f.seq = attempts_ - 1;
        f.payload = crypto::bigint_to_bytes(keypair_->public_value);
        ctx.publish(*channel_, f);
    }

    const crypto::DhGroup& group_;
    bool initiator_ = true;
    std::optional<crypto::DhKeyPair> keypair_;
    std::optional<net::ChannelId> channel_;
    std::uint32_t link_ = 0;
    crypto::KeySize ksize_ = crypto::KeySize::Bits128;
    std::uint64_t timeout_ms_ = 100;
    std::optional<std::uint8_t> pending_epoch_;
    std::uint8_t next_epoch_ = 0;
    unsigned attempts_ = 0;
    bool exchanged_ = false;
};

class CycleTimerService final : public Service {
public:
    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event == "INIT") {
            period_ms_ = as_uint(ctx.in("DT"), "DT");
            if (period_ms_ == 0) throw AlgorithmError("E_CYCLE period DT must be positive");
            ctx.emit("INITO");
            return;
        }
        if (event == "START") {
            if (period_ms_ == 0) period_ms_ = as_uint(ctx.in("DT"), "DT");
            if (period_ms_ == 0) throw AlgorithmError("E_CYCLE period DT must be positive");
            if (running_) return;
            running_ = true;
            ctx.schedule("__tick", period_ms_);
            return;
        }
        if (event == "STOP") {
            running_ = false;
            ctx.cancel("__tick");
            return;
        }
        if (event == "__tick") {
            if (!running_) return;
            ctx.emit("EO");
            ctx.schedule("__tick", period_ms_);
        }
    }

private:
    std::uint64_t period_ms_ = 0;
    bool running_ = false;
};

class TimeStampRecorderService final : public Service {
public:
    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event != "REQ") return;
        ctx.write("TS", ctx.clock().now_ms());
        ctx.emit("CNF");
    }
};

class ConvertToArrayService final : public Service {
public:
    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event != "REQ") return;
        Block16 block;
        // Random padding in bytes 1..15 keeps repeated trip values from
        // producing identical ECB ciphertexts.
        ctx.rng().fill({block.data() + 1, 15});
        block[0] = as_bool(ctx.in("IN"), "IN") ? 0x01 : 0x00;
        ctx.write("OUT", block);
        ctx.emit("CNF");
    }
};

class ConvertFromArrayService final : public Service {
public:
    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event != "REQ") return;
        const Block16 block = as_block(ctx.in("IN"), "IN");
        if (block[0] > 0x01) {
            // neither alias: corrupted or wrong-key ciphertext
            ctx.write("ERRS", as_uint(ctx.out("ERRS"), "ERRS") + 1);
            return;
        }
        ctx.write("OUT", block[0] == 0x01);
        ctx.emit("CNF");
    }
};

class CollectorService final : public Service {
public:
    explicit CollectorService(SampleSink sink) : sink_(std::move(sink)) {}

    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event == "T1") {
            const std::uint32_t seq = as_u32(ctx.in("SEQ1"), "SEQ1");
            t1_[seq] = as_uint(ctx.in("TSV"), "TSV");
            try_pair(ctx, seq);
            return;
        }
        if (event == "T2") {
            const std::uint32_t seq = as_u32(ctx.in("SEQ2"), "SEQ2");
            t2_[seq] = {as_uint(ctx.in("TSR"), "TSR"), as_u8(ctx.in("EP"), "EP")};
            try_pair(ctx, seq);
        }
    }

private:
    void try_pair(ServiceContext& ctx, std::uint32_t seq) {
        auto a = t1_.find(seq);
        auto b = t2_.find(seq);
        if (a == t1_.end() || b == t2_.end()) return;
        LatencySample sample;
        sample.link_id = as_u32(ctx.in("LINK"), "LINK");
        sample.seq = seq;
        sample.t1 = a->second;
        sample.t2 = b->second.first;
        sample.epoch = b->second.second;
        t1_.erase(a);
        t2_.erase(b);
        ctx.write("COUNT", as_uint(ctx.out("COUNT"), "COUNT") + 1);
        if (sink_) sink_(sample);
    }

    SampleSink sink_;
    std::map<std::uint32_t, std::uint64_t> t1_;
    std::map<std::uint32_t, std::pair<std::uint64_t, std::uint8_t>> t2_;
};

class CurrentSourceService final : public Service {
public:
    explicit CurrentSourceService(CurrentProvider provider) : provider_(std::move(provider)) {}

    void on_event(ServiceContext& ctx, const std::string& event) override {
        if (event != "TICK") return;
        std::vector<double> values;
        if (provider_) values = provider_(ctx.instance_path(), cycle_);
        ++cycle_;
        std::size_t i = 0;
        for (const char* port : {"I", "I1", "I2"}) {
            // write each declared LREAL output in order
            try {
                ctx.out(port);
            } catch (const AlgorithmError&) {
                continue;
            }
            ctx.write(port, i < values.size() ? values[i] : 0.0);
            ++i;
        }
        ctx.emit("CNF");
    }

private:
    CurrentProvider provider_;
    std::uint64_t cycle_ = 0;
};

// ---------------------------------------------------------------------------
// Standard library definition
// ---------------------------------------------------------------------------

struct TypeBuilder {
    FBType t;

    TypeBuilder(std::string name, FBKind kind) {
        t.name = std::move(name);
        t.kind = kind;
        if (kind == FBKind::Basic) t.ecc.emplace();
    }
    TypeBuilder& service(std::string s) {
        t.service = std::move(s);
        return *this;
    }
    TypeBuilder& ev_in(std::string name, std::vector<std::string> with = {}) {
        if (!with.empty()) t.interface.with_assoc[name] = std::move(with);
        t.interface.event_inputs.push_back(std::move(name));
        return *this;
    }
    TypeBuilder& ev_out(std::string name, std::vector<std::string> with = {}) {
        if (!with.empty()) t.interface.with_assoc[name] = std::move(with);
        t.interface.event_outputs.push_back(std::move(name));
        return *this;
    }
    TypeBuilder& d_in(std::string name, DataKind k) {
        t.interface.data_inputs.emplace_back(std::move(name), k);
        return *this;
    }
    TypeBuilder& d_out(std::string name, DataKind k) {
        t.interface.data_outputs.emplace_back(std::move(name), k);
        return *this;
    }
    TypeBuilder& internal(std::string name, DataKind k) {
        t.ecc->internal_vars.push_back({std::move(name), k, std::nullopt});
        return *this;
    }
    TypeBuilder& states(std::vector<std::string> s, std::string initial) {
        t.ecc->states = std::move(s);
        t.ecc->initial = std::move(initial);
        return *this;
    }
    TypeBuilder& tr(std::string from, std::optional<std::string> trigger,
                    std::optional<std::string> guard, std::string to) {
        t.ecc->transitions.push_back({std::move(from), std::move(trigger), std::move(guard), std::move(to)});
        return *this;
    }
    TypeBuilder& act(const std::string& state, std::string algorithm,
                     std::optional<std::string> emit = std::nullopt) {
        t.ecc->actions[state].push_back({std::move(algorithm), std::move(emit)});
        return *this;
    }
};

std::map<std::string, FBType> build_standard_library() {
    std::map<std::string, FBType> lib;
    auto put = [&lib](TypeBuilder& b) { lib[b.t.name] = std::move(b.t); };

    {
        TypeBuilder b("AESKeyExp", FBKind::Basic);
        b.ev_in("REQ", {"KEY", "KSIZE", "EPIN"}).ev_out("CNF", {"EXPKEY", "EPOUT"});
        b.d_in("KEY", DataKind::String).d_in("KSIZE", DataKind::Uint).d_in("EPIN", DataKind::Uint);
        b.d_out("EXPKEY", DataKind::String).d_out("EPOUT", DataKind::Uint);
        b.states({"START", "EXPAND"}, "START");
        b.tr("START", "REQ", std::nullopt, "EXPAND").tr("EXPAND", std::nullopt, std::nullopt, "START");
        b.act("EXPAND", "aes_key_expand", "CNF");
        put(b);
    }
    {
        TypeBuilder b("AESEncrypt", FBKind::Basic);
        b.ev_in("REQ", {"PT", "EXPKEY", "EPIN"}).ev_out("CNF", {"CT", "EPOUT"});
        b.d_in("PT", DataKind::Bytes16).d_in("EXPKEY", DataKind::String).d_in("EPIN", DataKind::Uint);
        b.d_out("CT", DataKind::Bytes16).d_out("EPOUT", DataKind::Uint).d_out("DROPS", DataKind::Uint);
        b.states({"START", "WORK", "NOKEY"}, "START");
        // trips arriving before a session key is negotiated are counted, not sent
        b.tr("START", "REQ", "NOT (EXPKEY == \"\")", "WORK");
        b.tr("START", "REQ", std::nullopt, "NOKEY");
        b.tr("WORK", std::nullopt, std::nullopt, "START");
        b.tr("NOKEY", std::nullopt, std::nullopt, "START");
        b.act("WORK", "aes_encrypt_block", "CNF");
        b.act("NOKEY", "count_drop");
        put(b);
    }
    {
        TypeBuilder b("AESDecrypt", FBKind::Basic);
        b.ev_in("REQ", {"CT", "EXPKEY"}).ev_out("CNF", {"PT"});
        b.d_in("CT", DataKind::Bytes16).d_in("EXPKEY", DataKind::String);
        b.d_out("PT", DataKind::Bytes16);
        b.states({"START", "WORK"}, "START");
        b.tr("START", "REQ", std::nullopt, "WORK").tr("WORK", std::nullopt, std::nullopt, "START");
        b.act("WORK", "aes_decrypt_block", "CNF");
        put(b);
    }
    {
        TypeBuilder b("KeyStore", FBKind::Basic);
        b.ev_in("NEWKEY", {"KEYIN", "EPIN"}).ev_in("SEL", {"WANT"}).ev_out("SELO", {"KEYOUT"});
        b.d_in("KEYIN", DataKind::String).d_in("EPIN", DataKind::Uint).d_in("WANT", DataKind::Uint);
        b.d_out("KEYOUT", DataKind::String).d_out("MISSES", DataKind::Uint);
        b.internal("CURK", DataKind::String).internal("CURE", DataKind::Uint);
        b.internal("PREVK", DataKind::String).internal("PREVE", DataKind::Uint);
        b.internal("FOUND", DataKind::Bool);
        b.states({"START", "STORE", "LOOKUP", "HIT"}, "START");
        b.tr("START", "NEWKEY", std::nullopt, "STORE");
        b.tr("STORE", std::nullopt, std::nullopt, "START");
        b.tr("START", "SEL", std::nullopt, "LOOKUP");
        b.tr("LOOKUP", std::nullopt, "FOUND == true", "HIT");
        b.tr("LOOKUP", std::nullopt, std::nullopt, "START");
        b.tr("HIT", std::nullopt, std::nullopt, "START");
        b.act("STORE", "keystore_put");
        b.act("LOOKUP", "keystore_get");
        b.act("HIT", "", "SELO");
        put(b);
    }
    {
        TypeBuilder b("SeqCounter", FBKind::Basic);
        b.ev_in("REQ").ev_out("CNF", {"SEQ"});
        b.d_out("SEQ", DataKind::Uint);
        b.internal("N", DataKind::Uint);
        b.states({"START", "BUMP"}, "START");
        b.tr("START", "REQ", std::nullopt, "BUMP").tr("BUMP", std::nullopt, std::nullopt, "START");
        b.act("BUMP", "counter_next", "CNF");
        put(b);
    }
    {
        TypeBuilder b("Relay", FBKind::Basic);
        b.ev_in("REQ", {"IN"}).ev_out("CNF", {"OUT"});
        b.d_in("IN", DataKind::Bool).d_out("OUT", DataKind::Bool);
        b.states({"START", "COPY"}, "START");
        b.tr("START", "REQ", std::nullopt, "COPY").tr("COPY", std::nullopt, std::nullopt, "START");
        b.act("COPY", "relay_copy", "CNF");
        put(b);
    }

    // Protection functions: strict thresholds, guard-dispatched for the
    // single-current shapes.
    for (const char* name : {"OverCurrent", "EarthFault"}) {
        TypeBuilder b(name, FBKind::Basic);
        b.ev_in("REQ", {"I", "THRESH"}).ev_out("CNF", {"TRIP"});
        b.d_in("I", DataKind::LReal).d_in("THRESH", DataKind::LReal);
        b.d_out("TRIP", DataKind::Bool);
        b.states({"START", "TRIPPED", "CLEARED"}, "START");
        b.tr("START", "REQ", "I > THRESH", "TRIPPED");
        b.tr("START", "REQ", std::nullopt, "CLEARED");
        b.tr("TRIPPED", std::nullopt, std::nullopt, "START");
        b.tr("CLEARED", std::nullopt, std::nullopt, "START");
        b.act("TRIPPED", "set_trip", "CNF");
        b.act("CLEARED", "clear_trip", "CNF");
        put(b);
    }
    {
        TypeBuilder b("Differential", FBKind::Basic);
        b.ev_in("REQ", {"I1", "I2", "THRESH"}).ev_out("CNF", {"TRIP"});
        b.d_in("I1", DataKind::LReal).d_in("I2", DataKind::LReal).d_in("THRESH", DataKind::LReal);
        b.d_out("TRIP", DataKind::Bool);
        b.states({"START", "EVAL"}, "START");
        b.tr("START", "REQ", std::nullopt, "EVAL").tr("EVAL", std::nullopt, std::nullopt, "START");
        b.act("EVAL", "differential_eval", "CNF");
        put(b);
    }
    {
        TypeBuilder b("Breaker", FBKind::Basic);
        b.ev_in("REQ", {"T_OC", "T_DP", "T_EF"}).ev_out("CNF", {"OPEN"});
        b.d_in("T_OC", DataKind::Bool).d_in("T_DP", DataKind::Bool).d_in("T_EF", DataKind::Bool);
        b.d_out("OPEN", DataKind::Bool);
        b.states({"START", "EVAL"}, "START");
        b.tr("START", "REQ", std::nullopt, "EVAL").tr("EVAL", std::nullopt, std::nullopt, "START");
        b.act("EVAL", "breaker_eval", "CNF");
        put(b);
    }

    {
        TypeBuilder b("Publisher", FBKind::Sifb);
        b.service("publisher");
        b.ev_in("INIT", {"ID", "LINK", "SENDER"}).ev_in("REQ", {"SD", "EPOCH", "SEQ"});
        b.ev_out("INITO").ev_out("CNF");
        b.d_in("ID", DataKind::String).d_in("LINK", DataKind::Uint).d_in("SENDER", DataKind::Uint);
        b.d_in("SD", DataKind::Bytes16).d_in("EPOCH", DataKind::Uint).d_in("SEQ", DataKind::Uint);
        put(b);
    }
    {
        TypeBuilder b("TsPublisher", FBKind::Sifb);
        b.service("ts_publisher");
        b.ev_in("INIT", {"ID", "LINK", "SENDER"}).ev_in("REQ", {"TSVAL", "SEQ"});
        b.ev_out("INITO").ev_out("CNF");
        b.d_in("ID", DataKind::String).d_in("LINK", DataKind::Uint).d_in("SENDER", DataKind::Uint);
        b.d_in("TSVAL", DataKind::Uint).d_in("SEQ", DataKind::Uint);
        put(b);
    }
    {
        TypeBuilder b("Subscriber", FBKind::Sifb);
        b.service("subscriber");
        b.ev_in("INIT", {"ID", "LINK"});
        b.ev_out("INITO").ev_out("IND", {"CT", "EPOCH", "SEQ", "SENDER"});
        b.d_in("ID", DataKind::String).d_in("LINK", DataKind::Uint);
        b.d_out("CT", DataKind::Bytes16).d_out("EPOCH", DataKind::Uint);
        b.d_out("SEQ", DataKind::Uint).d_out("SENDER", DataKind::Uint).d_out("ERRS", DataKind::Uint);
        put(b);
    }
    {
        TypeBuilder b("TsSubscriber", FBKind::Sifb);
        b.service("ts_subscriber");
        b.ev_in("INIT", {"ID", "LINK"});
        b.ev_out("INITO").ev_out("IND", {"TSVAL", "SEQ"});
        b.d_in("ID", DataKind::String).d_in("LINK", DataKind::Uint);
        b.d_out("TSVAL", DataKind::Uint).d_out("SEQ", DataKind::Uint);
        put(b);
    }
    // One key-exchange SIFB shape under two names; QI picks the role.
    for (const char* name : {"DHInitiator", "DHResponder"}) {
        TypeBuilder b(name, FBKind::Sifb);
        b.service("dh_kex");
        b.ev_in("INIT", {"QI", "ID", "KSIZE", "LINK", "TMO"}).ev_in("START").ev_in("REQ");
        b.ev_out("INITO").ev_out("CNF", {"KEY", "EPOCH", "STATUS"});
        b.d_in("QI", DataKind::Bool).d_in("ID", DataKind::String).d_in("KSIZE", DataKind::Uint);
        b.d_in("LINK", DataKind::Uint).d_in("TMO", DataKind::Uint);
        b.d_out("KEY", DataKind::String).d_out("EPOCH", DataKind::Uint).d_out("STATUS", DataKind::String);
        put(b);
    }
    {
        TypeBuilder b("E_CYCLE", FBKind::Sifb);
        b.service("cycle_timer");
        b.ev_in("INIT", {"DT"}).ev_in("START").ev_in("STOP");
        b.ev_out("INITO").ev_out("EO");
        b.d_in("DT", DataKind::Uint);
        put(b);
    }
    {
        TypeBuilder b("TimeStampRecorder", FBKind::Sifb);
        b.service("timestamp_recorder");
        b.ev_in("REQ").ev_out("CNF", {"TS"});
        b.d_out("TS", DataKind::Uint);
        put(b);
    }
    {
        TypeBuilder b("ConvertToArray", FBKind::Sifb);
        b.service("convert_to_array");
        b.ev_in("REQ", {"IN"}).ev_out("CNF", {"OUT"});
        b.d_in("IN", DataKind::Bool).d_out("OUT", DataKind::Bytes16);
        put(b);
    }
    {
        TypeBuilder b("ConvertFromArray", FBKind::Sifb);
        b.service("convert_from_array");
        b.ev_in("REQ", {"IN"}).ev_out("CNF", {"OUT"});
        b.d_in("IN", DataKind::Bytes16).d_out("OUT", DataKind::Bool).d_out("ERRS", DataKind::Uint);
        put(b);
    }
    {
        TypeBuilder b("Collector", FBKind::Sifb);
        b.service("collector");
        b.ev_in("T1", {"SEQ1", "TSV"}).ev_in("T2", {"SEQ2", "TSR", "EP"});
        b.d_in("SEQ1", DataKind::Uint).d_in("TSV", DataKind::Uint);
        b.d_in("SEQ2", DataKind::Uint).d_in("TSR", DataKind::Uint).d_in("EP", DataKind::Uint);
        b.d_in("LINK", DataKind::Uint);
        b.d_out("COUNT", DataKind::Uint);
        put(b);
    }
    {
        TypeBuilder b("CurrentSource", FBKind::Sifb);
        b.service("current_source");
        b.ev_in("TICK").ev_out("CNF", {"I"});
        b.d_out("I", DataKind::LReal);
        put(b);
    }
    {
        TypeBuilder b("DualCurrentSource", FBKind::Sifb);
        b.service("current_source");
        b.ev_in("TICK").ev_out("CNF", {"I1", "I2"});
        b.d_out("I1", DataKind::LReal).d_out("I2", DataKind::LReal);
        put(b);
    }

    return lib;
}

}  // namespace

const std::map<std::string, FBType>& standard_library() {
    static const std::map<std::string, FBType> lib = build_standard_library();
    return lib;
}

bool is_standard_type(const std::string& name) {
    return standard_library().count(name) > 0;
}

const AlgorithmRegistry& standard_algorithms() {
    static const AlgorithmRegistry reg = [] {
        AlgorithmRegistry r;
        r.add("aes_key_expand", alg_aes_key_expand);
        r.add("aes_encrypt_block", alg_aes_encrypt_block);
        r.add("aes_decrypt_block", alg_aes_decrypt_block);
        r.add("count_drop", alg_count_drop);
        r.add("keystore_put", alg_keystore_put);
        r.add("keystore_get", alg_keystore_get);
        r.add("counter_next", alg_counter_next);
        r.add("relay_copy", alg_relay_copy);
        r.add("set_trip", alg_set_trip);
        r.add("clear_trip", alg_clear_trip);
        r.add("differential_eval", alg_differential_eval);
        r.add("breaker_eval", alg_breaker_eval);
        return r;
    }();
    return reg;
}

ServiceRegistry standard_services(const ServiceConfig& config) {
    const crypto::DhGroup& group = config.dh_group ? *config.dh_group : crypto::modp2048_group();
    SampleSink sink = config.sample_sink;
    CurrentProvider provider = config.current_provider;

    ServiceRegistry reg;
    reg.add("publisher", [](const std::string&) { return std::make_unique<PublisherService>(); });
    reg.add("ts_publisher", [](const std::string&) { return std::make_unique<TsPublisherService>(); });
    reg.add("subscriber", [](const std::string&) { return std::make_unique<SubscriberService>(); });
    reg.add("ts_subscriber", [](const std::string&) { return std::make_unique<TsSubscriberService>(); });
    reg.add("dh_kex",
            [g = &group](const std::string&) { return std::make_unique<KexService>(*g); });
    reg.add("cycle_timer", [](const std::string&) { return std::make_unique<CycleTimerService>(); });
    reg.add("timestamp_recorder",
            [](const std::string&) { return std::make_unique<TimeStampRecorderService>(); });
    reg.add("convert_to_array",
            [](const std::string&) { return std::make_unique<ConvertToArrayService>(); });
    reg.add("convert_from_array",
            [](const std::string&) { return std::make_unique<ConvertFromArrayService>(); });
    reg.add("collector",
            [sink](const std::string&) { return std::make_unique<CollectorService>(sink); });
    reg.add("current_source",
            [provider](const std::string&) { return std::make_unique<CurrentSourceService>(provider); });
    return reg;
}

}  // namespace fbsec::rt
