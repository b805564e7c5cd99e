#include "fbsec/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "fbsec/sim.hpp"

namespace fbsec::bench {

const char* topology_name(Topology t) {
    return t == Topology::Single ? "single" : "distributed";
}

namespace {

std::string config_label(const BenchOptions& opts, const Application& app) {
    std::string cipher;
    if (!opts.with_encryption) {
        cipher = "no encryption";
    } else if (opts.keysize_override) {
        cipher = "AES" + std::to_string(*opts.keysize_override);
    } else {
        // mixed keysizes straight from the annotations
        std::set<std::uint64_t> sizes;
        for (const auto& sl : app.secure_links)
            if (auto ks = sl.keysize_bits()) sizes.insert(*ks);
        cipher = "AES";
        bool first = true;
        for (auto s : sizes) {
            cipher += (first ? "" : "/") + std::to_string(s);
            first = false;
        }
    }
    return cipher + " / " + topology_name(opts.topology);
}

std::uint64_t sum_counter(rt::DeviceRuntime& rt, const std::string& type_name,
                          const std::string& port) {
    std::uint64_t total = 0;
    for (const auto& [path, type] : rt.instance_types()) {
        if (type != type_name) continue;
        const Value v = rt.output_value(path, port);
        if (const auto* u = std::get_if<std::uint64_t>(&v)) total += *u;
    }
    return total;
}

}  // namespace

BenchReport run_latency_bench(const Application& app, const BenchOptions& opts) {
    if (opts.cycles < 100)
        throw BenchError("cycle count must be at least 100 (got " + std::to_string(opts.cycles) + ")");

    Application prepared = app;
    if (opts.keysize_override) {
        if (*opts.keysize_override != 128 && *opts.keysize_override != 192 &&
            *opts.keysize_override != 256)
            throw BenchError("keysize override must be 128, 192 or 256");
        for (auto& sl : prepared.secure_links)
            sl.params["keysize"] = static_cast<std::uint64_t>(*opts.keysize_override);
    }

    cl::CompileOptions copts;
    copts.base = opts.base;
    copts.with_encryption = opts.with_encryption;
    auto compiled = cl::compile_secure_links(prepared, copts);
    if (!compiled.plan) {
        std::string msg = "compilation failed:";
        for (const auto& d : compiled.diags) msg += "\n  " + format_diagnostic(d);
        throw BenchError(msg);
    }
    cl::DeploymentPlan& plan = *compiled.plan;
    if (plan.links.empty()) throw BenchError("application has no cross-device secure links to measure");

    // Instrumentation sanity: every generated pipeline carries timestamp
    // recorders and a collector.
    for (const auto& [name, type] : plan.fb_types) {
        if (type.kind != FBKind::Composite) continue;
        const bool sender = name.find("Sender") != std::string::npos;
        const bool recv = name.find("Recv") != std::string::npos;
        if (!sender && !recv) continue;
        bool has_ts = false, has_col = false;
        for (const auto& [inst, t] : type.network->instances) {
            has_ts |= t == "TimeStampRecorder";
            has_col |= t == "Collector";
        }
        if (!has_ts || (recv && !has_col))
            throw BenchError("plan is missing latency instrumentation in " + name);
    }

    auto clock = std::make_shared<VirtualClock>();
    net::LatencyModel model;
    if (opts.topology == Topology::Distributed) {
        model.fixed_ms = opts.latency_ms;
        model.jitter_ms = opts.jitter_ms;
    }
    net::LoopbackNetwork fabric(clock, model, opts.seed);

    std::map<std::uint32_t, std::vector<rt::LatencySample>> samples;
    rt::ServiceConfig scfg;
    scfg.sample_sink = [&samples](const rt::LatencySample& s) { samples[s.link_id].push_back(s); };
    scfg.current_provider = opts.current_provider;
    rt::ServiceRegistry services = rt::standard_services(scfg);
    crypto::SeededEntropy rng(opts.seed);

    std::map<std::string, FBType> library = rt::standard_library();
    for (const auto& [name, type] : plan.fb_types) library[name] = type;

    std::vector<std::unique_ptr<rt::DeviceRuntime>> runtimes;
    if (opts.topology == Topology::Single) {
        FBNetwork merged;
        for (const auto& dev : plan.devices) {
            const FBNetwork& net = plan.device_networks.at(dev);
            for (const auto& inst : net.instances) merged.instances.push_back(inst);
            for (const auto& c : net.event_conns) merged.event_conns.push_back(c);
            for (const auto& c : net.data_conns) merged.data_conns.push_back(c);
            for (const auto& p : net.param_bindings) merged.param_bindings.insert(p);
        }
        runtimes.push_back(std::make_unique<rt::DeviceRuntime>(
            "single", merged, library, services, rt::standard_algorithms(), clock, &fabric, &rng));
    } else {
        for (const auto& dev : plan.devices)
            runtimes.push_back(std::make_unique<rt::DeviceRuntime>(
                dev, plan.device_networks.at(dev), library, services, rt::standard_algorithms(),
                clock, &fabric, &rng));
    }

    rt::SimDriver driver(clock, &fabric);
    for (auto& rt_ptr : runtimes) driver.add(rt_ptr.get());

    // Boot in phases: INIT everything, let the session keys negotiate, and
    // only then start the scan clocks. Otherwise a slow network model could
    // leave the first scan's trips without a key.
    auto has_start = [&library](const std::string& type) {
        auto it = library.find(type);
        return it != library.end() && it->second.interface.has_event_input("START");
    };
    auto is_scan_clock = [](const std::string& path, const std::string& type) {
        return type == "E_CYCLE" && path.find('/') == std::string::npos;
    };
    for (auto& rt_ptr : runtimes) rt_ptr->boot_init();
    driver.run_all_idle();
    for (auto& rt_ptr : runtimes)
        for (const auto& [path, type] : rt_ptr->instance_types())
            if (has_start(type) && !is_scan_clock(path, type)) rt_ptr->inject(path, "START");
    const std::uint64_t warmup =
        2 * static_cast<std::uint64_t>(std::ceil(opts.latency_ms + opts.jitter_ms)) + 2;
    driver.run_until(warmup);
    for (auto& rt_ptr : runtimes)
        for (const auto& [path, type] : rt_ptr->instance_types())
            if (is_scan_clock(path, type)) rt_ptr->inject(path, "START");

    const std::uint64_t horizon = warmup + opts.cycles * opts.cycle_interval_ms;
    driver.run_until(horizon);

    // Stop the scan clocks so the tail flush does not add extra cycles.
    for (auto& rt_ptr : runtimes)
        for (const auto& [path, type] : rt_ptr->instance_types())
            if (type == "E_CYCLE") rt_ptr->inject(path, "STOP");
    const std::uint64_t tail =
        static_cast<std::uint64_t>(std::ceil(opts.latency_ms + opts.jitter_ms)) + 5;
    driver.run_until(horizon + tail);

    for (auto& rt_ptr : runtimes)
        for (const auto& d : rt_ptr->diagnostics())
            if (d.severity == Severity::Error) throw BenchError("runtime fault: " + format_diagnostic(d));

    BenchReport report;
    report.label = config_label(opts, prepared);
    report.cycles = opts.cycles;

    std::uint64_t total = 0;
    for (const auto& cl_link : plan.links) {
        LinkReport lr;
        lr.link_id = cl_link.link_id;
        const std::string* producer_type = app.root.type_of(cl_link.link.d_con.from.instance);
        lr.producer_type = producer_type ? *producer_type : "?";
        if (auto cfg = protection_for_type(lr.producer_type)) lr.deadline_ms = cfg->deadline_ms;

        auto it = samples.find(cl_link.link_id);
        if (it != samples.end()) lr.raw = it->second;
        lr.samples = lr.raw.size();
        if (!lr.raw.empty()) {
            lr.min_ms = UINT64_MAX;
            for (const auto& s : lr.raw) {
                const std::uint64_t latency = s.latency_ms();
                lr.min_ms = std::min(lr.min_ms, latency);
                lr.max_ms = std::max(lr.max_ms, latency);
                lr.mean_ms += static_cast<double>(latency);
                total += latency;
                if (lr.deadline_ms) {
                    if (latency <= *lr.deadline_ms)
                        ++lr.deadline_pass;
                    else
                        ++lr.deadline_fail;
                }
            }
            lr.mean_ms /= static_cast<double>(lr.raw.size());
        }
        report.samples += lr.samples;
        report.links.push_back(std::move(lr));
    }
    if (report.samples) {
        report.min_ms = UINT64_MAX;
        for (const auto& lr : report.links) {
            if (!lr.samples) continue;
            report.min_ms = std::min(report.min_ms, lr.min_ms);
            report.max_ms = std::max(report.max_ms, lr.max_ms);
        }
        report.mean_ms = static_cast<double>(total) / static_cast<double>(report.samples);
    } else {
        report.min_ms = 0;
    }

    for (auto& rt_ptr : runtimes) {
        report.sender_drops += sum_counter(*rt_ptr, "AESEncrypt", "DROPS");
        report.key_misses += sum_counter(*rt_ptr, "KeyStore", "MISSES");
        report.decode_errors += sum_counter(*rt_ptr, "ConvertFromArray", "ERRS");
        report.decode_errors += sum_counter(*rt_ptr, "Subscriber", "ERRS");
    }
    return report;
}

std::string format_table(const std::vector<BenchReport>& reports) {
    std::ostringstream os;
    os << "confidentiality layer latency (ms, virtual clock)\n";
    os << std::left << std::setw(30) << "configuration" << std::right << std::setw(8) << "min"
       << std::setw(10) << "mean" << std::setw(8) << "max" << std::setw(10) << "samples" << "\n";
    os << std::string(66, '-') << "\n";
    for (const auto& r : reports) {
        os << std::left << std::setw(30) << r.label << std::right << std::setw(8) << r.min_ms
           << std::setw(10) << std::fixed << std::setprecision(2) << r.mean_ms << std::setw(8)
           << r.max_ms << std::setw(10) << r.samples << "\n";
    }

    for (const auto& r : reports) {
        bool any = false;
        for (const auto& lr : r.links) any |= lr.deadline_ms.has_value();
        if (!any) continue;
        os << "\ndeadline verdicts (" << r.label << ", " << r.cycles << " cycles)\n";
        os << std::left << std::setw(16) << "function" << std::right << std::setw(6) << "link"
           << std::setw(13) << "deadline_ms" << std::setw(8) << "pass" << std::setw(8) << "fail"
           << "\n";
        for (const auto& lr : r.links) {
            if (!lr.deadline_ms) continue;
            os << std::left << std::setw(16) << lr.producer_type << std::right << std::setw(6)
               << lr.link_id << std::setw(13) << *lr.deadline_ms << std::setw(8) << lr.deadline_pass
               << std::setw(8) << lr.deadline_fail << "\n";
        }
        if (r.sender_drops || r.key_misses || r.decode_errors)
            os << "health: drops=" << r.sender_drops << " key_misses=" << r.key_misses
               << " decode_errors=" << r.decode_errors << "\n";
    }
    return os.str();
}

std::string format_csv(const BenchReport& report) {
    std::ostringstream os;
    os << "cycle,link,t1,t2,latency_ms,epoch\n";
    for (const auto& lr : report.links)
        for (const auto& s : lr.raw)
            os << s.seq << "," << lr.link_id << "," << s.t1 << "," << s.t2 << ","
               << s.latency_ms() << "," << static_cast<unsigned>(s.epoch) << "\n";
    return os.str();
}

}  // namespace fbsec::bench
