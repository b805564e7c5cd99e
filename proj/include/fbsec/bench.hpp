#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbsec/casestudy.hpp"
#include "fbsec/compiler.hpp"
#include "fbsec/services.hpp"

namespace fbsec::bench {

enum class Topology { Single, Distributed };

const char* topology_name(Topology t);

struct BenchOptions {
    std::size_t cycles = 100;  // the measurement method wants at least 100
    std::optional<unsigned> keysize_override;
    bool with_encryption = true;
    Topology topology = Topology::Distributed;
    double latency_ms = 0.0;  // one-way loopback latency (distributed only)
    double jitter_ms = 0.0;
    std::uint64_t seed = 1;
    std::uint64_t cycle_interval_ms = 10;
    net::ChannelId base{"239.0.0.1", 61000};
    rt::CurrentProvider current_provider;  // empty = quiescent sources
};

struct LinkReport {
    std::uint32_t link_id = 0;
    std::string producer_type;  // e.g. "Differential"
    std::optional<std::uint64_t> deadline_ms;
    std::size_t samples = 0;
    std::uint64_t min_ms = 0, max_ms = 0;
    double mean_ms = 0.0;
    std::size_t deadline_pass = 0, deadline_fail = 0;
    std::vector<rt::LatencySample> raw;
};

struct BenchReport {
    std::string label;  // "AES128 / distributed", "no encryption / single", ...
    std::size_t cycles = 0;
    std::size_t samples = 0;
    std::uint64_t min_ms = 0, max_ms = 0;
    double mean_ms = 0.0;
    std::vector<LinkReport> links;
    // health counters; all zero on a clean run
    std::uint64_t sender_drops = 0, key_misses = 0, decode_errors = 0;
};

struct BenchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Runs the compiled application on the loopback fabric under a virtual
/// clock: each secure link yields one latency sample (t1 before encryption,
/// t2 after decryption) per scan cycle. Throws BenchError for cycle counts
/// below 100, compilation failures or missing instrumentation.
BenchReport run_latency_bench(const Application& app, const BenchOptions& opts);

/// Aligned text table over a set of configurations.
std::string format_table(const std::vector<BenchReport>& reports);

/// One row per (cycle, link): cycle,link,t1,t2,latency_ms,epoch.
std::string format_csv(const BenchReport& report);

}  // namespace fbsec::bench
