#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fbsec/value.hpp"

namespace fbsec {

/// Minimal ECC guard language: literals, port/variable reads, <, >, ==, !=,
/// AND, OR, NOT, parentheses. No arithmetic.
struct GuardExpr;
using GuardPtr = std::shared_ptr<const GuardExpr>;

struct GuardExpr {
    enum class Op { Literal, Ref, Lt, Gt, Eq, Ne, And, Or, Not };
    Op op = Op::Literal;
    Value literal;
    std::string ref;
    GuardPtr lhs, rhs;
};

struct GuardParseResult {
    GuardPtr expr;       // null on error
    std::string error;   // empty on success
};

GuardParseResult parse_guard(const std::string& text);

/// Canonical rendering; parse_guard(guard_to_text(g)) reproduces g.
std::string guard_to_text(const GuardExpr& g);

/// Names referenced by the expression, in first-appearance order.
std::vector<std::string> guard_refs(const GuardExpr& g);

/// Environment resolves a name to its current value; nullopt = undeclared.
using GuardEnv = std::function<std::optional<Value>(const std::string&)>;

struct GuardEvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

bool eval_guard(const GuardExpr& g, const GuardEnv& env);

}  // namespace fbsec
