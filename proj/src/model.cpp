#include "fbsec/model.hpp"

#include <algorithm>

namespace fbsec {

bool FBInterface::has_event_input(const std::string& name) const {
    return std::find(event_inputs.begin(), event_inputs.end(), name) != event_inputs.end();
}

bool FBInterface::has_event_output(const std::string& name) const {
    return std::find(event_outputs.begin(), event_outputs.end(), name) != event_outputs.end();
}

std::optional<DataKind> FBInterface::data_input_kind(const std::string& name) const {
    for (const auto& [n, k] : data_inputs)
        if (n == name) return k;
    return std::nullopt;
}

std::optional<DataKind> FBInterface::data_output_kind(const std::string& name) const {
    for (const auto& [n, k] : data_outputs)
        if (n == name) return k;
    return std::nullopt;
}

const std::string* FBNetwork::type_of(const std::string& instance) const {
    for (const auto& [name, type] : instances)
        if (name == instance) return &type;
    return nullptr;
}

const char* goal_name(SecGoal goal) {
    switch (goal) {
        case SecGoal::Confidentiality: return "Confidentiality";
        case SecGoal::Integrity: return "Integrity";
        case SecGoal::Availability: return "Availability";
    }
    return "?";
}

std::optional<std::uint64_t> SecureLink::keysize_bits() const {
    auto it = params.find("keysize");
    if (it == params.end()) return std::nullopt;
    if (const auto* u = std::get_if<std::uint64_t>(&it->second)) return *u;
    if (const auto* i = std::get_if<std::int64_t>(&it->second); i && *i >= 0)
        return static_cast<std::uint64_t>(*i);
    return std::nullopt;
}

std::optional<std::uint64_t> SecureLink::rekey_ms() const {
    auto it = params.find("rekey");
    if (it == params.end()) return std::nullopt;
    if (const auto* u = std::get_if<std::uint64_t>(&it->second)) return *u;
    if (const auto* i = std::get_if<std::int64_t>(&it->second); i && *i >= 0)
        return static_cast<std::uint64_t>(*i);
    return std::nullopt;
}

std::optional<std::string> SecureLink::channel_tag() const {
    auto it = params.find("channel");
    if (it == params.end()) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    return std::nullopt;
}

const FBType* Application::find_type(const std::string& name) const {
    auto it = fb_types.find(name);
    return it == fb_types.end() ? nullptr : &it->second;
}

std::string format_diagnostic(const Diagnostic& d) {
    std::string out = d.severity == Severity::Error ? "error: " : "warning: ";
    if (d.span) {
        out = d.span->file + ":" + std::to_string(d.span->line) + ":" +
              std::to_string(d.span->column) + ": " + out;
    }
    if (!d.where.empty()) out += "[" + d.where + "] ";
    out += d.message;
    return out;
}

}  // namespace fbsec
