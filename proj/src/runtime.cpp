#include "fbsec/runtime.hpp"

#include <algorithm>
#include <cassert>

namespace fbsec::rt {

namespace {
constexpr std::size_t kEccSettleCap = 1024;
}

// ---------------------------------------------------------------------------
// Internal structures
// ---------------------------------------------------------------------------

struct DeviceRuntime::Instance {
    std::string path;
    const FBType* type = nullptr;
    std::unique_ptr<Service> service;   // SIFB only
    std::string state;                  // BASIC only
    std::map<std::string, Value> in_cur;   // sampled view
    std::map<std::string, Value> in_inc;   // latest propagated value
    std::map<std::string, Value> outputs;
    std::map<std::string, Value> internals;
    bool faulted = false;
};

struct DeviceRuntime::CompiledTransition {
    std::string from;
    std::optional<std::string> trigger;
    GuardPtr guard;
    std::string to;
};

struct DeviceRuntime::CompiledEcc {
    std::vector<CompiledTransition> transitions;
    const Ecc* source = nullptr;
};

class DeviceRuntime::AlgorithmCtx final : public AlgorithmContext {
public:
    AlgorithmCtx(DeviceRuntime& rt, Instance& inst) : rt_(rt), inst_(inst) {}

    Value in(const std::string& port) const override {
        auto it = inst_.in_cur.find(port);
        if (it == inst_.in_cur.end())
            throw AlgorithmError("read of undeclared data input '" + port + "'");
        return it->second;
    }
    Value out(const std::string& port) const override {
        auto it = inst_.outputs.find(port);
        if (it == inst_.outputs.end())
            throw AlgorithmError("read of undeclared data output '" + port + "'");
        return it->second;
    }
    Value internal(const std::string& name) const override {
        auto it = inst_.internals.find(name);
        if (it == inst_.internals.end())
            throw AlgorithmError("read of undeclared internal variable '" + name + "'");
        return it->second;
    }
    void write(const std::string& name, Value v) override {
        if (auto kind = inst_.type->interface.data_output_kind(name)) {
            if (kind_of(v) != *kind)
                throw AlgorithmError("wrong kind written to output '" + name + "'");
            rt_.write_output(inst_, name, std::move(v));
            return;
        }
        auto it = inst_.internals.find(name);
        if (it == inst_.internals.end())
            throw AlgorithmError("write to undeclared name '" + name + "'");
        if (kind_of(v) != kind_of(it->second))
            throw AlgorithmError("wrong kind written to internal '" + name + "'");
        it->second = std::move(v);
    }

private:
    DeviceRuntime& rt_;
    Instance& inst_;
};

class DeviceRuntime::ServiceCtx final : public ServiceContext {
public:
    ServiceCtx(DeviceRuntime& rt, Instance& inst, int idx) : rt_(rt), inst_(inst), idx_(idx) {}

    const std::string& instance_path() const override { return inst_.path; }

    Value in(const std::string& port) const override {
        auto it = inst_.in_cur.find(port);
        if (it == inst_.in_cur.end())
            throw AlgorithmError("read of undeclared data input '" + port + "'");
        return it->second;
    }
    Value out(const std::string& port) const override {
        auto it = inst_.outputs.find(port);
        if (it == inst_.outputs.end())
            throw AlgorithmError("read of undeclared data output '" + port + "'");
        return it->second;
    }
    void write(const std::string& port, Value v) override {
        auto kind = inst_.type->interface.data_output_kind(port);
        if (!kind) throw AlgorithmError("write to undeclared data output '" + port + "'");
        if (kind_of(v) != *kind) throw AlgorithmError("wrong kind written to output '" + port + "'");
        rt_.write_output(inst_, port, std::move(v));
    }
    void emit(const std::string& event) override {
        if (!inst_.type->interface.has_event_output(event))
            throw AlgorithmError("emit of undeclared event output '" + event + "'");
        rt_.emit_event(inst_, event);
    }
    void fault(const std::string& message) override { throw AlgorithmError(message); }

    Clock& clock() override { return *rt_.clock_; }
    crypto::EntropySource& rng() override {
        if (!rt_.rng_) throw AlgorithmError("no entropy source configured");
        return *rt_.rng_;
    }
    net::Transport& transport() override {
        if (!rt_.transport_) throw AlgorithmError("no transport configured");
        return *rt_.transport_;
    }

    void open_channel(const net::ChannelId& ch) override { transport().open(ch); }

    void subscribe(const net::ChannelId& ch, std::set<net::MsgType> accept,
                   std::optional<std::uint32_t> link_filter) override {
        DeviceRuntime* rt = &rt_;
        const int idx = idx_;
        net::SubscriptionSpec spec;
        spec.owner = inst_.path;
        spec.accept = std::move(accept);
        spec.link_filter = link_filter;
        spec.sink = [rt, idx](const net::WireFrame& f) {
            QueuedEvent ev;
            ev.inst = idx;
            ev.event = "<frame>";
            ev.frame = f;
            rt->push_external(std::move(ev));
        };
        rt_.subs_.push_back(transport().subscribe(ch, std::move(spec)));
    }

    void publish(const net::ChannelId& ch, const net::WireFrame& frame) override {
        transport().publish(ch, frame);
    }

    void schedule(const std::string& event, std::uint64_t delay_ms) override {
        rt_.schedule_timer(idx_, event, rt_.clock_->now_ms() + delay_ms);
    }
    void cancel(const std::string& event) override { rt_.cancel_timer(idx_, event); }

private:
    DeviceRuntime& rt_;
    Instance& inst_;
    int idx_;
};

// ---------------------------------------------------------------------------
// Construction: flatten composites into leaf instances plus leaf-to-leaf
// event/data routes.
// ---------------------------------------------------------------------------

namespace {

struct Node {
    enum class Kind { LeafOut, LeafIn, BoundaryIn, BoundaryOut } kind;
    std::string path;
    std::string port;

    auto operator<=>(const Node&) const = default;
};

struct FlattenState {
    const std::map<std::string, FBType>& lib;
    std::vector<std::pair<std::string, const FBType*>> leaves;
    std::map<Node, std::vector<Node>> ev_edges;
    std::map<Node, std::vector<Node>> data_edges;
    std::vector<std::pair<Node, Value>> boundary_params;
    std::vector<std::tuple<std::string, std::string, Value>> leaf_params;
};

const FBType& type_or_throw(const std::map<std::string, FBType>& lib, const std::string& name) {
    auto it = lib.find(name);
    if (it == lib.end()) throw InstantiationError("unknown FB type '" + name + "'");
    return it->second;
}

Node endpoint_node(FlattenState& st, const FBNetwork& net, const std::string& prefix,
                   const std::string& owner_path, const PortRef& ref, bool as_source, bool event) {
    if (ref.is_boundary()) {
        if (owner_path.empty())
            throw InstantiationError("boundary reference '" + ref.port + "' in a device network");
        // Inside a composite, the boundary input feeds inward and the
        // boundary output collects inward-produced values.
        return {as_source ? Node::Kind::BoundaryIn : Node::Kind::BoundaryOut, owner_path, ref.port};
    }
    const std::string* tn = net.type_of(ref.instance);
    if (!tn) throw InstantiationError("connection names unknown instance '" + ref.instance + "'");
    const FBType& t = type_or_throw(st.lib, *tn);
    const std::string path = prefix + ref.instance;
    if (t.kind == FBKind::Composite)
        return {as_source ? Node::Kind::BoundaryOut : Node::Kind::BoundaryIn, path, ref.port};
    return {as_source ? Node::Kind::LeafOut : Node::Kind::LeafIn, path, ref.port};
    (void)event;
}

void expand(FlattenState& st, const FBNetwork& net, const std::string& prefix,
            const std::string& owner_path) {
    for (const auto& [name, type_name] : net.instances) {
        const FBType& t = type_or_throw(st.lib, type_name);
        const std::string path = prefix + name;
        if (t.kind == FBKind::Composite) {
            if (!t.network) throw InstantiationError("composite '" + type_name + "' has no network");
            expand(st, *t.network, path + "/", path);
        } else {
            st.leaves.emplace_back(path, &t);
        }
    }
    for (const auto& conn : net.event_conns) {
        Node from = endpoint_node(st, net, prefix, owner_path, conn.from, true, true);
        Node to = endpoint_node(st, net, prefix, owner_path, conn.to, false, true);
        st.ev_edges[from].push_back(to);
    }
    for (const auto& conn : net.data_conns) {
        Node from = endpoint_node(st, net, prefix, owner_path, conn.from, true, false);
        Node to = endpoint_node(st, net, prefix, owner_path, conn.to, false, false);
        st.data_edges[from].push_back(to);
    }
    for (const auto& [key, value] : net.param_bindings) {
        const auto& [inst, port] = key;
        const std::string* tn = net.type_of(inst);
        if (!tn) throw InstantiationError("parameter on unknown instance '" + inst + "'");
        const FBType& t = type_or_throw(st.lib, *tn);
        const std::string path = prefix + inst;
        if (t.kind == FBKind::Composite)
            st.boundary_params.push_back({Node{Node::Kind::BoundaryIn, path, port}, value});
        else
            st.leaf_params.emplace_back(path, port, value);
    }
}

void resolve_targets(const std::map<Node, std::vector<Node>>& edges, const Node& start,
                     std::vector<Node>& out, std::set<Node>& visiting) {
    if (!visiting.insert(start).second) return;  // cycle through boundaries
    auto it = edges.find(start);
    if (it == edges.end()) return;
    for (const Node& next : it->second) {
        if (next.kind == Node::Kind::LeafIn)
            out.push_back(next);
        else
            resolve_targets(edges, next, out, visiting);
    }
}

std::vector<Node> leaf_targets(const std::map<Node, std::vector<Node>>& edges, const Node& start) {
    std::vector<Node> out;
    std::set<Node> visiting;
    resolve_targets(edges, start, out, visiting);
    return out;
}

}  // namespace

DeviceRuntime::DeviceRuntime(std::string device_name, const FBNetwork& network,
                             const std::map<std::string, FBType>& library,
                             const ServiceRegistry& services, const AlgorithmRegistry& algorithms,
                             std::shared_ptr<Clock> clock, net::Transport* transport,
                             crypto::EntropySource* rng)
    : device_name_(std::move(device_name)),
      clock_(std::move(clock)),
      transport_(transport),
      rng_(rng),
      algorithms_(algorithms) {
    types_ = library;

    FlattenState st{types_, {}, {}, {}, {}, {}};
    expand(st, network, "", "");

    for (const auto& [path, type] : st.leaves) {
        auto inst = std::make_unique<Instance>();
        inst->path = path;
        inst->type = type;
        for (const auto& [port, kind] : type->interface.data_inputs) {
            inst->in_cur[port] = default_value(kind);
            inst->in_inc[port] = default_value(kind);
        }
        for (const auto& [port, kind] : type->interface.data_outputs)
            inst->outputs[port] = default_value(kind);

        if (type->kind == FBKind::Basic) {
            inst->state = type->ecc->initial;
            for (const auto& var : type->ecc->internal_vars)
                inst->internals[var.name] = var.init ? *var.init : default_value(var.kind);
            if (!compiled_eccs_.count(type->name)) {
                CompiledEcc compiled;
                compiled.source = &*type->ecc;
                for (const auto& tr : type->ecc->transitions) {
                    CompiledTransition ct;
                    ct.from = tr.from;
                    ct.trigger = tr.trigger;
                    ct.to = tr.to;
                    if (tr.guard) {
                        auto parsed = parse_guard(*tr.guard);
                        if (!parsed.expr)
                            throw InstantiationError("fbtype " + type->name + ": bad guard '" +
                                                     *tr.guard + "': " + parsed.error);
                        ct.guard = parsed.expr;
                    }
                    compiled.transitions.push_back(std::move(ct));
                }
                compiled_eccs_[type->name] = std::move(compiled);
            }
        } else if (type->kind == FBKind::Sifb) {
            const ServiceFactory* factory = services.find(type->service);
            if (!factory)
                throw InstantiationError("no service binding registered for SIFB type '" +
                                         type->name + "' (service '" + type->service + "')");
            inst->service = (*factory)(path);
        }

        index_[path] = static_cast<int>(instances_.size());
        instances_.push_back(std::move(inst));
    }

    // Leaf-to-leaf routes through any number of composite boundaries.
    for (const auto& [from, tos] : st.ev_edges) {
        if (from.kind != Node::Kind::LeafOut) continue;
        for (const Node& target : leaf_targets(st.ev_edges, from)) {
            auto it = index_.find(target.path);
            if (it == index_.end())
                throw InstantiationError("event route ends at unknown instance '" + target.path + "'");
            event_routes_[{from.path, from.port}].emplace_back(it->second, target.port);
        }
    }
    for (const auto& [from, tos] : st.data_edges) {
        if (from.kind != Node::Kind::LeafOut) continue;
        for (const Node& target : leaf_targets(st.data_edges, from)) {
            auto it = index_.find(target.path);
            if (it == index_.end())
                throw InstantiationError("data route ends at unknown instance '" + target.path + "'");
            data_routes_[{from.path, from.port}].emplace_back(it->second, target.port);
        }
    }

    auto apply_param = [&](const std::string& path, const std::string& port, const Value& v) {
        auto it = index_.find(path);
        if (it == index_.end())
            throw InstantiationError("parameter targets unknown instance '" + path + "'");
        Instance& inst = *instances_[it->second];
        auto kind = inst.type->interface.data_input_kind(port);
        if (!kind)
            throw InstantiationError("parameter targets unknown input " + path + "." + port);
        Value coerced = v;
        if (kind_of(v) != *kind) {
            auto c = coerce_literal(v, *kind);
            if (!c)
                throw InstantiationError("parameter " + path + "." + port + " has wrong kind");
            coerced = *c;
        }
        inst.in_cur[port] = coerced;
        inst.in_inc[port] = coerced;
    };

    for (const auto& [path, port, value] : st.leaf_params) apply_param(path, port, value);
    for (const auto& [node, value] : st.boundary_params) {
        for (const Node& target : leaf_targets(st.data_edges, node))
            apply_param(target.path, target.port, value);
    }
}

DeviceRuntime::~DeviceRuntime() {
    if (transport_) {
        for (net::SubId id : subs_) {
            try {
                transport_->unsubscribe(id);
            } catch (...) {
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Event processing
// ---------------------------------------------------------------------------

int DeviceRuntime::index_of(const std::string& instance) const {
    auto it = index_.find(instance);
    if (it == index_.end())
        throw std::out_of_range("no instance '" + instance + "' on device " + device_name_);
    return it->second;
}

void DeviceRuntime::boot_init() {
    for (const auto& inst : instances_)
        if (inst->type->interface.has_event_input("INIT")) inject(inst->path, "INIT");
}

void DeviceRuntime::boot_start() {
    for (const auto& inst : instances_)
        if (inst->type->interface.has_event_input("START")) inject(inst->path, "START");
}

void DeviceRuntime::inject(const std::string& instance, const std::string& event) {
    QueuedEvent ev;
    ev.inst = index_of(instance);
    ev.event = event;
    push_external(std::move(ev));
}

void DeviceRuntime::push_frame(const std::string& instance, const net::WireFrame& frame) {
    QueuedEvent ev;
    ev.inst = index_of(instance);
    ev.event = "<frame>";
    ev.frame = frame;
    push_external(std::move(ev));
}

void DeviceRuntime::push_external(QueuedEvent ev) {
    {
        std::lock_guard lock(mailbox_mu_);
        mailbox_.push_back(std::move(ev));
        events_emitted_++;
    }
    mailbox_cv_.notify_one();
}

bool DeviceRuntime::idle() const {
    if (!internal_q_.empty()) return false;
    std::lock_guard lock(mailbox_mu_);
    return mailbox_.empty();
}

std::size_t DeviceRuntime::queued_events() const {
    std::lock_guard lock(mailbox_mu_);
    return internal_q_.size() + mailbox_.size();
}

bool DeviceRuntime::step() {
    QueuedEvent ev;
    if (!internal_q_.empty()) {
        ev = std::move(internal_q_.front());
        internal_q_.pop_front();
    } else {
        std::lock_guard lock(mailbox_mu_);
        if (mailbox_.empty()) return false;
        ev = std::move(mailbox_.front());
        mailbox_.pop_front();
    }
    events_processed_++;
    if (trace_enabled_)
        trace_.push_back({clock_->now_ms(), instances_[ev.inst]->path, ev.event});
    dispatch(ev);
    return true;
}

std::size_t DeviceRuntime::run_until_idle(std::size_t max_steps) {
    std::size_t steps = 0;
    while (steps < max_steps && step()) ++steps;
    if (steps == max_steps && !idle()) {
        diags_.push_back({Severity::Error, "device " + device_name_,
                          "event processing did not terminate within " + std::to_string(max_steps) +
                              " steps (possible event loop in the network)",
                          std::nullopt});
    }
    return steps;
}

void DeviceRuntime::dispatch(const QueuedEvent& ev) {
    Instance& inst = *instances_[ev.inst];
    if (inst.faulted) return;  // faulted instances stay inert

    ServiceCtx ctx(*this, inst, ev.inst);
    try {
        if (ev.frame) {
            if (!inst.service) throw AlgorithmError("frame delivered to a non-service instance");
            inst.service->on_frame(ctx, *ev.frame);
            return;
        }
        // Sample the data inputs associated with the arriving event.
        auto assoc = inst.type->interface.with_assoc.find(ev.event);
        if (assoc != inst.type->interface.with_assoc.end()) {
            for (const auto& port : assoc->second) {
                auto in = inst.in_inc.find(port);
                if (in != inst.in_inc.end()) inst.in_cur[port] = in->second;
            }
        }
        if (inst.type->kind == FBKind::Sifb) {
            inst.service->on_event(ctx, ev.event);
        } else if (inst.type->kind == FBKind::Basic) {
            run_ecc(inst, ev.event);
        }
    } catch (const std::exception& e) {
        mark_faulted(inst, e.what());
    }
}

void DeviceRuntime::run_ecc(Instance& inst, const std::string& event) {
    const CompiledEcc& ecc = compiled_eccs_.at(inst.type->name);

    GuardEnv env = [&inst](const std::string& name) -> std::optional<Value> {
        if (auto it = inst.in_cur.find(name); it != inst.in_cur.end()) return it->second;
        if (auto it = inst.internals.find(name); it != inst.internals.end()) return it->second;
        return std::nullopt;
    };

    bool event_live = true;
    std::size_t iter = 0;
    for (; iter < kEccSettleCap; ++iter) {
        const CompiledTransition* firing = nullptr;
        for (const auto& tr : ecc.transitions) {
            if (tr.from != inst.state) continue;
            if (tr.trigger && (!event_live || *tr.trigger != event)) continue;
            if (tr.guard && !eval_guard(*tr.guard, env)) continue;
            firing = &tr;
            break;
        }
        if (!firing) break;
        if (firing->trigger) event_live = false;
        inst.state = firing->to;

        auto actions = ecc.source->actions.find(inst.state);
        if (actions != ecc.source->actions.end()) {
            for (const auto& action : actions->second) {
                if (!action.algorithm.empty()) run_algorithm(inst, action.algorithm);
                if (action.emit) emit_event(inst, *action.emit);
            }
        }
    }
    if (iter == kEccSettleCap)
        throw AlgorithmError("ECC did not settle after " + std::to_string(kEccSettleCap) +
                             " transitions");
}

void DeviceRuntime::run_algorithm(Instance& inst, const std::string& name) {
    const Algorithm* alg = algorithms_.find(name);
    if (!alg) throw AlgorithmError("no algorithm registered under '" + name + "'");
    AlgorithmCtx ctx(*this, inst);
    (*alg)(ctx);
}

void DeviceRuntime::emit_event(const Instance& inst, const std::string& event) {
    auto it = event_routes_.find({inst.path, event});
    if (it == event_routes_.end()) return;
    for (const auto& [idx, target_event] : it->second) {
        QueuedEvent ev;
        ev.inst = idx;
        ev.event = target_event;
        internal_q_.push_back(std::move(ev));
        events_emitted_++;
    }
}

void DeviceRuntime::write_output(Instance& inst, const std::string& port, Value v) {
    auto it = data_routes_.find({inst.path, port});
    if (it != data_routes_.end()) {
        for (const auto& [idx, target_port] : it->second)
            instances_[idx]->in_inc[target_port] = v;
    }
    inst.outputs[port] = std::move(v);
}

void DeviceRuntime::mark_faulted(Instance& inst, const std::string& message) {
    inst.faulted = true;
    diags_.push_back({Severity::Error, "instance " + inst.path + " on " + device_name_, message,
                      std::nullopt});
}

// ---------------------------------------------------------------------------
// Timers
// ---------------------------------------------------------------------------

void DeviceRuntime::schedule_timer(int inst, const std::string& event, std::uint64_t due) {
    cancel_timer(inst, event);
    timers_.push_back({due, timer_seq_++, inst, event});
}

void DeviceRuntime::cancel_timer(int inst, const std::string& event) {
    timers_.erase(std::remove_if(timers_.begin(), timers_.end(),
                                 [&](const Timer& t) { return t.inst == inst && t.event == event; }),
                  timers_.end());
}

std::optional<std::uint64_t> DeviceRuntime::next_timer_due() const {
    std::optional<std::uint64_t> due;
    for (const auto& t : timers_)
        if (!due || t.due < *due) due = t.due;
    return due;
}

void DeviceRuntime::fire_timers_due(std::uint64_t now) {
    std::vector<Timer> due;
    timers_.erase(std::remove_if(timers_.begin(), timers_.end(),
                                 [&](Timer& t) {
                                     if (t.due <= now) {
                                         due.push_back(t);
                                         return true;
                                     }
                                     return false;
                                 }),
                  timers_.end());
    std::sort(due.begin(), due.end(),
              [](const Timer& a, const Timer& b) { return a.due != b.due ? a.due < b.due : a.seq < b.seq; });
    for (const auto& t : due) {
        QueuedEvent ev;
        ev.inst = t.inst;
        ev.event = t.event;
        push_external(std::move(ev));
    }
}

// ---------------------------------------------------------------------------
// Inspection
// ---------------------------------------------------------------------------

Value DeviceRuntime::input_value(const std::string& instance, const std::string& port) const {
    return instances_[index_of(instance)]->in_cur.at(port);
}

Value DeviceRuntime::output_value(const std::string& instance, const std::string& port) const {
    return instances_[index_of(instance)]->outputs.at(port);
}

Value DeviceRuntime::internal_value(const std::string& instance, const std::string& name) const {
    return instances_[index_of(instance)]->internals.at(name);
}

const std::string& DeviceRuntime::ecc_state(const std::string& instance) const {
    return instances_[index_of(instance)]->state;
}

bool DeviceRuntime::faulted(const std::string& instance) const {
    return instances_[index_of(instance)]->faulted;
}

std::vector<std::string> DeviceRuntime::instance_paths() const {
    std::vector<std::string> out;
    for (const auto& inst : instances_) out.push_back(inst->path);
    return out;
}

std::vector<std::pair<std::string, std::string>> DeviceRuntime::instance_types() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& inst : instances_) out.emplace_back(inst->path, inst->type->name);
    return out;
}

bool DeviceRuntime::has_instance(const std::string& instance) const {
    return index_.count(instance) > 0;
}

void DeviceRuntime::set_input(const std::string& instance, const std::string& port, Value v) {
    Instance& inst = *instances_[index_of(instance)];
    auto kind = inst.type->interface.data_input_kind(port);
    if (!kind) throw std::out_of_range("no data input '" + port + "' on '" + instance + "'");
    if (kind_of(v) != *kind) {
        auto coerced = coerce_literal(v, *kind);
        if (!coerced) throw std::invalid_argument("wrong kind for input '" + port + "'");
        v = *coerced;
    }
    inst.in_inc[port] = v;
    inst.in_cur[port] = std::move(v);
}

// ---------------------------------------------------------------------------
// Real-time loop
// ---------------------------------------------------------------------------

void run_realtime(DeviceRuntime& rt, std::uint64_t duration_ms) {
    const std::uint64_t end = rt.clock_->now_ms() + duration_ms;
    for (;;) {
        rt.fire_timers_due(rt.clock_->now_ms());
        while (rt.step()) {
        }
        const std::uint64_t now = rt.clock_->now_ms();
        if (now >= end && rt.idle()) break;

        std::uint64_t wake_at = end;
        if (auto due = rt.next_timer_due()) wake_at = std::min(wake_at, *due);
        if (wake_at <= now) continue;

        std::unique_lock lock(rt.mailbox_mu_);
        if (!rt.mailbox_.empty()) continue;
        rt.mailbox_cv_.wait_for(lock, std::chrono::milliseconds(wake_at - now),
                                [&] { return !rt.mailbox_.empty(); });
    }
}

}  // namespace fbsec::rt
