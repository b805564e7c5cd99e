#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fbsec/diagnostics.hpp"
#include "fbsec/value.hpp"

namespace fbsec {

// ---------------------------------------------------------------------------
// Function-block domain model. Values are immutable after construction and
// safe to share across threads.
// ---------------------------------------------------------------------------

struct FBInterface {
    std::vector<std::string> event_inputs;
    std::vector<std::string> event_outputs;
    std::vector<std::pair<std::string, DataKind>> data_inputs;
    std::vector<std::pair<std::string, DataKind>> data_outputs;
    // event name -> associated data ports of the matching direction
    std::map<std::string, std::vector<std::string>> with_assoc;

    bool has_event_input(const std::string& name) const;
    bool has_event_output(const std::string& name) const;
    std::optional<DataKind> data_input_kind(const std::string& name) const;
    std::optional<DataKind> data_output_kind(const std::string& name) const;

    bool operator==(const FBInterface&) const = default;
};

struct EccAction {
    std::string algorithm;             // empty = no algorithm, emit only
    std::optional<std::string> emit;   // output event to emit after the algorithm

    bool operator==(const EccAction&) const = default;
};

struct EccTransition {
    std::string from;
    std::optional<std::string> trigger;  // nullopt = ALWAYS
    std::optional<std::string> guard;    // canonical guard text, nullopt = unguarded
    std::string to;

    bool operator==(const EccTransition&) const = default;
};

struct InternalVar {
    std::string name;
    DataKind kind = DataKind::Bool;
    std::optional<Value> init;

    bool operator==(const InternalVar&) const = default;
};

struct Ecc {
    std::vector<std::string> states;
    std::string initial;
    std::vector<EccTransition> transitions;  // evaluated in declaration order
    std::map<std::string, std::vector<EccAction>> actions;
    std::vector<InternalVar> internal_vars;

    bool operator==(const Ecc&) const = default;
};

// A connection endpoint. An empty instance names the enclosing composite's
// own boundary port.
struct PortRef {
    std::string instance;
    std::string port;

    bool is_boundary() const { return instance.empty(); }
    std::string str() const { return instance.empty() ? port : instance + "." + port; }
    bool operator==(const PortRef&) const = default;
    auto operator<=>(const PortRef&) const = default;
};

struct EventConn {
    PortRef from, to;
    bool operator==(const EventConn&) const = default;
};

struct DataConn {
    PortRef from, to;
    bool operator==(const DataConn&) const = default;
};

struct FBNetwork {
    // declaration order preserved; names unique
    std::vector<std::pair<std::string, std::string>> instances;  // name -> type name
    std::vector<EventConn> event_conns;
    std::vector<DataConn> data_conns;
    // literals bound to unconnected data inputs: (instance, port) -> value
    std::map<std::pair<std::string, std::string>, Value> param_bindings;

    const std::string* type_of(const std::string& instance) const;
    bool has_instance(const std::string& instance) const { return type_of(instance) != nullptr; }
    void add_instance(std::string name, std::string type) {
        instances.emplace_back(std::move(name), std::move(type));
    }

    bool operator==(const FBNetwork&) const = default;
};

enum class FBKind { Basic, Composite, Sifb };

struct FBType {
    std::string name;
    FBKind kind = FBKind::Basic;
    FBInterface interface;
    std::optional<Ecc> ecc;            // Basic only
    std::optional<FBNetwork> network;  // Composite only
    std::string service;               // Sifb only: registered service name

    bool operator==(const FBType&) const = default;
};

enum class SecGoal { Confidentiality, Integrity, Availability };

const char* goal_name(SecGoal goal);

/// A design-time security annotation attached to one data connection.
struct SecureLink {
    DataConn d_con;  // identifies the annotated connection by its endpoints
    SecGoal goal = SecGoal::Confidentiality;
    std::string alg;                      // e.g. "AES"
    std::map<std::string, Value> params;  // keysize (UINT bits), rekey (UINT ms), channel (STRING)

    std::optional<std::uint64_t> keysize_bits() const;
    std::optional<std::uint64_t> rekey_ms() const;
    std::optional<std::string> channel_tag() const;

    bool operator==(const SecureLink&) const = default;
};

// Annotation defaults when params are omitted.
inline constexpr std::uint64_t kDefaultKeysizeBits = 128;
inline constexpr std::uint64_t kDefaultRekeyMs = 60000;

struct Application {
    std::map<std::string, FBType> fb_types;  // includes the built-in library after parsing
    FBNetwork root;
    std::vector<std::string> devices;
    std::map<std::string, std::string> mapping;  // root instance -> device
    std::vector<SecureLink> secure_links;

    const FBType* find_type(const std::string& name) const;

    bool operator==(const Application&) const = default;
};

// ---------------------------------------------------------------------------
// fb-core operations
// ---------------------------------------------------------------------------

/// Structural validation of every model invariant. Idempotent, side-effect
/// free; returns an empty list iff the application is well-formed.
std::vector<Diagnostic> validate_application(const Application& app);

struct CrossDeviceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Data connections whose endpoints map to different devices, in declaration
/// order. Throws CrossDeviceError naming the instance if one is unmapped.
std::vector<DataConn> cross_device_connections(const Application& app);

}  // namespace fbsec
