#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbsec/model.hpp"

namespace fbsec::fbs {

// ---------------------------------------------------------------------------
// Textual application language (.fbs). Block-structured, one construct per
// line, UTF-8, LF or CRLF accepted, LF emitted. // comments to end of line.
//
//   fbtype Toggler basic { ... ecc { ... } }
//   fbtype CLSender composite { ... network { ... } }
//   fbtype Publisher sifb publisher { ... }
//   app { instance a: T; data a.X -> b.Y @secure(C, AES, keysize=128); ... }
//   devices { ied1; ied2; }
//   map { a -> ied1; }
//
// The built-in FB library (standard_library) is an implicit prelude; only
// user-defined types appear in documents.
// ---------------------------------------------------------------------------

/// Raw `@keyword(args...)` annotation as written, before interpretation.
struct AnnotationAst {
    std::string keyword;            // always "secure" for secure links
    std::vector<std::string> args;  // raw argument tokens, in order
    SourceSpan span;

    bool operator==(const AnnotationAst&) const = default;
};

struct SecureLinkFragment {
    SecGoal goal = SecGoal::Confidentiality;
    std::string alg;
    std::map<std::string, Value> params;
};

struct AnnotationParseResult {
    std::optional<SecureLinkFragment> fragment;
    std::vector<Diagnostic> diags;
};

/// Interprets a secure annotation: goal token C|I|A, algorithm name, then
/// key=value parameters (duration suffixes s/ms accepted for rekey).
/// Defaults are filled in: keysize=128, rekey=60s.
AnnotationParseResult parse_secure_annotation(const AnnotationAst& ast);

struct ParseResult {
    std::optional<Application> app;  // present iff no error diagnostics
    std::vector<Diagnostic> diags;
};

ParseResult parse_application(const std::string& text, const std::string& filename = "<input>");

/// Canonical serialization; round-trips under parse_application. Built-in
/// library types are implied and not emitted.
std::string serialize_application(const Application& app);

}  // namespace fbsec::fbs
