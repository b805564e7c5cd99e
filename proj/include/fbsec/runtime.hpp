#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fbsec/clock.hpp"
#include "fbsec/entropy.hpp"
#include "fbsec/guard.hpp"
#include "fbsec/model.hpp"
#include "fbsec/transport.hpp"

namespace fbsec::rt {

struct InstantiationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown by algorithms and services to mark the instance faulted. Faulted
/// instances stay inert; the device keeps running.
struct AlgorithmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class DeviceRuntime;

/// Execution view handed to a registered algorithm: the owning instance's
/// sampled inputs, outputs and internal variables. Output writes propagate
/// along data connections immediately.
class AlgorithmContext {
public:
    virtual ~AlgorithmContext() = default;
    virtual Value in(const std::string& port) const = 0;
    virtual Value out(const std::string& port) const = 0;
    virtual Value internal(const std::string& name) const = 0;
    virtual void write(const std::string& port_or_internal, Value v) = 0;
};

using Algorithm = std::function<void(AlgorithmContext&)>;

class AlgorithmRegistry {
public:
    void add(const std::string& name, Algorithm fn) { fns_[name] = std::move(fn); }
    const Algorithm* find(const std::string& name) const {
        auto it = fns_.find(name);
        return it == fns_.end() ? nullptr : &it->second;
    }

private:
    std::map<std::string, Algorithm> fns_;
};

/// Runtime services available to an SIFB callback: data access plus clock,
/// transport, entropy, timers and channel subscription. Callbacks must not
/// block the event loop for unbounded time.
class ServiceContext {
public:
    virtual ~ServiceContext() = default;

    virtual const std::string& instance_path() const = 0;
    virtual Value in(const std::string& port) const = 0;
    virtual Value out(const std::string& port) const = 0;
    virtual void write(const std::string& port, Value v) = 0;
    virtual void emit(const std::string& event) = 0;
    virtual void fault(const std::string& message) = 0;

    virtual Clock& clock() = 0;
    virtual crypto::EntropySource& rng() = 0;
    virtual net::Transport& transport() = 0;

    /// Frames matching the spec are handed back through Service::on_frame.
    virtual void subscribe(const net::ChannelId& ch, std::set<net::MsgType> accept,
                           std::optional<std::uint32_t> link_filter) = 0;
    virtual void open_channel(const net::ChannelId& ch) = 0;
    virtual void publish(const net::ChannelId& ch, const net::WireFrame& frame) = 0;

    /// Schedules `event` back to this instance after delay_ms; one pending
    /// timer per (instance, event) pair, later calls replace earlier ones.
    virtual void schedule(const std::string& event, std::uint64_t delay_ms) = 0;
    virtual void cancel(const std::string& event) = 0;
};

class Service {
public:
    virtual ~Service() = default;
    virtual void on_event(ServiceContext& ctx, const std::string& event) = 0;
    virtual void on_frame(ServiceContext& ctx, const net::WireFrame& frame) { (void)ctx; (void)frame; }
};

using ServiceFactory = std::function<std::unique_ptr<Service>(const std::string& instance_path)>;

class ServiceRegistry {
public:
    void add(const std::string& name, ServiceFactory factory) { factories_[name] = std::move(factory); }
    const ServiceFactory* find(const std::string& name) const {
        auto it = factories_.find(name);
        return it == factories_.end() ? nullptr : &it->second;
    }

private:
    std::map<std::string, ServiceFactory> factories_;
};

struct TraceEntry {
    std::uint64_t t_ms;
    std::string instance;
    std::string event;

    bool operator==(const TraceEntry&) const = default;
};

/// Single-threaded event loop over one device's flattened FB network.
/// Internal event propagation is strictly FIFO; external stimuli (frames,
/// timers, injections) queue in a thread-safe mailbox that is drained only
/// when the internal queue is empty, so each stimulus runs its event chain
/// to completion before the next begins.
class DeviceRuntime {
public:
    DeviceRuntime(std::string device_name, const FBNetwork& network,
                  const std::map<std::string, FBType>& library, const ServiceRegistry& services,
                  const AlgorithmRegistry& algorithms, std::shared_ptr<Clock> clock,
                  net::Transport* transport, crypto::EntropySource* rng);
    ~DeviceRuntime();

    DeviceRuntime(const DeviceRuntime&) = delete;
    DeviceRuntime& operator=(const DeviceRuntime&) = delete;

    const std::string& device_name() const { return device_name_; }

    /// Queues INIT to every instance declaring it, in declaration order.
    void boot_init();
    /// Queues START likewise; run after subscriptions settle.
    void boot_start();

    /// Processes one queued event. Returns false iff nothing was pending.
    bool step();

    /// Steps until idle or max_steps; emits a non-termination diagnostic
    /// when the cap is hit (likely an event loop in the network).
    std::size_t run_until_idle(std::size_t max_steps);

    bool idle() const;

    // External stimulus entry points (thread-safe).
    void inject(const std::string& instance, const std::string& event);
    void push_frame(const std::string& instance, const net::WireFrame& frame);

    /// Driver-facing timer surface.
    std::optional<std::uint64_t> next_timer_due() const;
    void fire_timers_due(std::uint64_t now);

    // Inspection.
    Value input_value(const std::string& instance, const std::string& port) const;
    Value output_value(const std::string& instance, const std::string& port) const;
    Value internal_value(const std::string& instance, const std::string& name) const;
    const std::string& ecc_state(const std::string& instance) const;
    bool faulted(const std::string& instance) const;
    std::vector<std::string> instance_paths() const;
    std::vector<std::pair<std::string, std::string>> instance_types() const;  // (path, type name)
    bool has_instance(const std::string& instance) const;

    /// Test/driver helper: writes a data input directly (both the pending
    /// and sampled view).
    void set_input(const std::string& instance, const std::string& port, Value v);

    const std::vector<Diagnostic>& diagnostics() const { return diags_; }

    void enable_trace(bool on) { trace_enabled_ = on; }
    const std::vector<TraceEntry>& trace() const { return trace_; }

    std::uint64_t events_emitted() const { return events_emitted_; }
    std::uint64_t events_processed() const { return events_processed_; }
    std::size_t queued_events() const;

    Clock& clock() { return *clock_; }

private:
    struct Instance;
    struct CompiledTransition;
    struct CompiledEcc;
    class AlgorithmCtx;
    class ServiceCtx;
    friend class ServiceCtx;

    struct QueuedEvent {
        int inst = -1;
        std::string event;
        std::optional<net::WireFrame> frame;
    };

    struct Timer {
        std::uint64_t due;
        std::uint64_t seq;
        int inst;
        std::string event;
    };

    void build(const FBNetwork& network, const std::map<std::string, FBType>& library);
    void dispatch(const QueuedEvent& ev);
    void run_ecc(Instance& inst, const std::string& event);
    void run_algorithm(Instance& inst, const std::string& name);
    void emit_event(const Instance& inst, const std::string& event);
    void write_output(Instance& inst, const std::string& port, Value v);
    void mark_faulted(Instance& inst, const std::string& message);
    void push_external(QueuedEvent ev);
    int index_of(const std::string& instance) const;  // throws on unknown
    void schedule_timer(int inst, const std::string& event, std::uint64_t due);
    void cancel_timer(int inst, const std::string& event);

    std::string device_name_;
    std::shared_ptr<Clock> clock_;
    net::Transport* transport_;
    crypto::EntropySource* rng_;

    std::map<std::string, FBType> types_;  // private copy; leaf instances point into it
    std::vector<net::SubId> subs_;
    std::vector<std::unique_ptr<Instance>> instances_;
    std::map<std::string, int> index_;
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<int, std::string>>> event_routes_;
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<int, std::string>>> data_routes_;
    std::map<std::string, CompiledEcc> compiled_eccs_;  // by type name
    const AlgorithmRegistry& algorithms_;

    std::deque<QueuedEvent> internal_q_;
    mutable std::mutex mailbox_mu_;
    std::condition_variable mailbox_cv_;
    std::deque<QueuedEvent> mailbox_;

    std::vector<Timer> timers_;  // sorted on access
    std::uint64_t timer_seq_ = 0;

    std::vector<Diagnostic> diags_;
    bool trace_enabled_ = false;
    std::vector<TraceEntry> trace_;
    std::atomic<std::uint64_t> events_emitted_{0};
    std::uint64_t events_processed_ = 0;

    friend void run_realtime(DeviceRuntime& rt, std::uint64_t duration_ms);
};

/// Wall-clock loop: steps the device, firing timers as they come due, until
/// duration_ms elapses and the queues are idle.
void run_realtime(DeviceRuntime& rt, std::uint64_t duration_ms);

}  // namespace fbsec::rt
