#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fbsec/model.hpp"
#include "fbsec/transport.hpp"

namespace fbsec::cl {

/// Channels backing one lowered link: ciphertext data, key exchange, and the
/// t1 timestamp shipment.
struct ChannelTriple {
    net::ChannelId data, ke, ts;

    bool operator==(const ChannelTriple&) const = default;
};

struct CompiledLink {
    SecureLink link;
    std::uint32_t link_id = 0;   // 1-based, in annotation declaration order
    std::uint16_t sender_id = 0;
    ChannelTriple channels;
    std::string source_device;   // initiator role
    std::string target_device;   // responder role
    std::string sender_instance;
    std::string recv_instance;
};

struct DeploymentPlan {
    std::vector<std::string> devices;                  // declaration order
    std::map<std::string, FBNetwork> device_networks;  // device -> lowered network
    std::map<std::string, FBType> fb_types;            // user + generated types (no builtins)
    std::vector<CompiledLink> links;
    std::vector<Diagnostic> warnings;
    bool with_encryption = true;
};

struct CompileOptions {
    net::ChannelId base{"239.0.0.1", 61000};
    /// false = reference pipeline without the cipher/key-exchange stages,
    /// used for the no-encryption benchmark rows.
    bool with_encryption = true;
};

struct CompileResult {
    std::optional<DeploymentPlan> plan;  // present iff no error diagnostics
    std::vector<Diagnostic> diags;
};

/// Lowers every Confidentiality/AES annotation on a cross-device data
/// connection into a CLSender on the source device and a CLRecv on the
/// target device. Same-device annotations warn and stay untouched;
/// Integrity/Availability goals and non-AES algorithms are rejected.
CompileResult compile_secure_links(const Application& app, const CompileOptions& opts = {});

struct ChannelAllocError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic channel plan: link i takes ports base+3i (data), +1 (KE),
/// +2 (timestamp). Links share one data channel iff their parameters match
/// (alg, keysize, rekey), they land on the same target device, and both set
/// the same explicit `channel` tag. Throws ChannelAllocError past port 65535.
std::vector<ChannelTriple> allocate_channels(const std::vector<SecureLink>& links,
                                             const std::vector<std::string>& target_devices,
                                             const net::ChannelId& base);

/// One parseable .fbs document per device; parsing then validating each
/// yields no diagnostics, and byte-identical output across repeated
/// compilations of the same application.
std::map<std::string, std::string> emit_plan(const DeploymentPlan& plan);

/// Line-oriented channel-table manifest.
std::string emit_manifest(const DeploymentPlan& plan, const net::ChannelId& base);

}  // namespace fbsec::cl
