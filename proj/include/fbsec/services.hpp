#pragma once

#include <functional>

#include "fbsec/dh.hpp"
#include "fbsec/runtime.hpp"

namespace fbsec::rt {

/// Built-in leaf FB types every application may use without declaring them:
/// the AES/key-exchange blocks, pub/sub and timer SIFBs, converters,
/// instrumentation and the protection-function blocks. The parser seeds its
/// type library from this set.
const std::map<std::string, FBType>& standard_library();

bool is_standard_type(const std::string& name);

/// Algorithms referenced by the built-in basic FB types.
const AlgorithmRegistry& standard_algorithms();

/// One end-to-end latency observation for a secure link: t1 taken before
/// encryption on the sender, t2 after decryption on the receiver.
struct LatencySample {
    std::uint32_t link_id = 0;
    std::uint32_t seq = 0;
    std::uint8_t epoch = 0;
    std::uint64_t t1 = 0;
    std::uint64_t t2 = 0;

    std::uint64_t latency_ms() const { return t2 >= t1 ? t2 - t1 : 0; }

    bool operator==(const LatencySample&) const = default;
};

using SampleSink = std::function<void(const LatencySample&)>;

/// Supplies the stub current sources: values for an instance's LREAL
/// outputs, one call per TICK. Cycle numbering is per instance.
using CurrentProvider =
    std::function<std::vector<double>(const std::string& instance_path, std::uint64_t cycle)>;

struct ServiceConfig {
    const crypto::DhGroup* dh_group = nullptr;  // null = 2048-bit MODP group
    SampleSink sample_sink;                     // latency collector target, may be empty
    CurrentProvider current_provider;           // may be empty: sources emit 0.0
};

/// Service bindings for every SIFB type in the standard library.
ServiceRegistry standard_services(const ServiceConfig& config = {});

}  // namespace fbsec::rt
