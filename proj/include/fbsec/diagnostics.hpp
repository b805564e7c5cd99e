#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fbsec {

struct SourceSpan {
    std::string file;
    int line = 1;    // 1-based
    int column = 1;  // 1-based
    int length = 0;

    bool operator==(const SourceSpan&) const = default;
};

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string where;  // structural location, e.g. "fbtype OverCurrent/ecc"
    std::string message;
    std::optional<SourceSpan> span;
};

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Severity::Error) return true;
    return false;
}

std::string format_diagnostic(const Diagnostic& d);

}  // namespace fbsec
