#pragma once

#include "fbsec/model.hpp"

namespace fbsec::bench {

enum class ProtectionFunction { Overcurrent, Differential, EarthFault };

struct ProtectionConfig {
    ProtectionFunction function;
    double threshold_amps;
    std::uint64_t deadline_ms;
};

/// Defaults: overcurrent trips above 100 A within 600 ms; differential above
/// a 1 A imbalance within 5 ms; earth fault shares the differential timing
/// class with its own threshold.
ProtectionConfig default_protection(ProtectionFunction f);

/// Deadline class for a protection FB type name; nullopt for non-protection
/// producers.
std::optional<ProtectionConfig> protection_for_type(const std::string& fb_type_name);

/// The smart-grid protection study: three protection IEDs (differential,
/// earth fault, overcurrent) publishing encrypted trip signals to a breaker
/// IED. The differential and earth-fault links share a 128-bit channel; the
/// overcurrent link runs 256-bit on its own channel. Stub current sources
/// tick every 10 ms.
Application build_case_study();

}  // namespace fbsec::bench
