#include "fbsec/guard.hpp"

#include <cctype>
#include <cstdlib>

namespace fbsec {

namespace {

struct Token {
    enum class Kind { Ident, Int, Float, String, Lt, Gt, Eq, Ne, LParen, RParen, End } kind;
    std::string text;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ >= src_.size()) return {Token::Kind::End, ""};
        const char c = src_[pos_];
        if (c == '(') { ++pos_; return {Token::Kind::LParen, "("}; }
        if (c == ')') { ++pos_; return {Token::Kind::RParen, ")"}; }
        if (c == '<') { ++pos_; return {Token::Kind::Lt, "<"}; }
        if (c == '>') { ++pos_; return {Token::Kind::Gt, ">"}; }
        if (c == '=' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') { pos_ += 2; return {Token::Kind::Eq, "=="}; }
        if (c == '!' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') { pos_ += 2; return {Token::Kind::Ne, "!="}; }
        if (c == '"') {
            std::string s;
            ++pos_;
            while (pos_ < src_.size() && src_[pos_] != '"') {
                if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
                    ++pos_;
                    switch (src_[pos_]) {
                        case 'n': s += '\n'; break;
                        case 't': s += '\t'; break;
                        case 'r': s += '\r'; break;
                        default: s += src_[pos_];
                    }
                } else {
                    s += src_[pos_];
                }
                ++pos_;
            }
            if (pos_ >= src_.size()) { error = "unterminated string"; return {Token::Kind::End, ""}; }
            ++pos_;
            return {Token::Kind::String, s};
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            std::size_t start = pos_;
            if (c == '-') ++pos_;
            bool is_float = false;
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
                    src_[pos_] == 'e' || src_[pos_] == 'E' ||
                    ((src_[pos_] == '+' || src_[pos_] == '-') && (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')))) {
                if (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E') is_float = true;
                ++pos_;
            }
            return {is_float ? Token::Kind::Float : Token::Kind::Int, src_.substr(start, pos_ - start)};
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            return {Token::Kind::Ident, src_.substr(start, pos_ - start)};
        }
        error = std::string("unexpected character '") + c + "'";
        ++pos_;
        return {Token::Kind::End, ""};
    }

    std::string error;

private:
    const std::string& src_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) { advance(); }

    GuardPtr parse(std::string& err) {
        GuardPtr e = parse_or();
        if (!error_.empty()) { err = error_; return nullptr; }
        if (cur_.kind != Token::Kind::End) { err = "trailing input after expression"; return nullptr; }
        if (!lex_.error.empty()) { err = lex_.error; return nullptr; }
        return e;
    }

private:
    void advance() { cur_ = lex_.next(); }
    void fail(std::string msg) { if (error_.empty()) error_ = std::move(msg); }

    static GuardPtr node(GuardExpr::Op op, GuardPtr l, GuardPtr r) {
        auto g = std::make_shared<GuardExpr>();
        g->op = op;
        g->lhs = std::move(l);
        g->rhs = std::move(r);
        return g;
    }

    GuardPtr parse_or() {
        GuardPtr e = parse_and();
        while (error_.empty() && cur_.kind == Token::Kind::Ident && cur_.text == "OR") {
            advance();
            e = node(GuardExpr::Op::Or, e, parse_and());
        }
        return e;
    }

    GuardPtr parse_and() {
        GuardPtr e = parse_not();
        while (error_.empty() && cur_.kind == Token::Kind::Ident && cur_.text == "AND") {
            advance();
            e = node(GuardExpr::Op::And, e, parse_not());
        }
        return e;
    }

    GuardPtr parse_not() {
        if (cur_.kind == Token::Kind::Ident && cur_.text == "NOT") {
            advance();
            return node(GuardExpr::Op::Not, parse_not(), nullptr);
        }
        return parse_cmp();
    }

    GuardPtr parse_cmp() {
        GuardPtr l = parse_primary();
        GuardExpr::Op op;
        switch (cur_.kind) {
            case Token::Kind::Lt: op = GuardExpr::Op::Lt; break;
            case Token::Kind::Gt: op = GuardExpr::Op::Gt; break;
            case Token::Kind::Eq: op = GuardExpr::Op::Eq; break;
            case Token::Kind::Ne: op = GuardExpr::Op::Ne; break;
            default: return l;
        }
        advance();
        return node(op, l, parse_primary());
    }

    GuardPtr parse_primary() {
        auto g = std::make_shared<GuardExpr>();
        switch (cur_.kind) {
            case Token::Kind::LParen: {
                advance();
                GuardPtr inner = parse_or();
                if (cur_.kind != Token::Kind::RParen) { fail("expected ')'"); return inner; }
                advance();
                return inner;
            }
            case Token::Kind::Int:
                g->op = GuardExpr::Op::Literal;
                g->literal = static_cast<std::int64_t>(std::strtoll(cur_.text.c_str(), nullptr, 10));
                advance();
                return g;
            case Token::Kind::Float:
                g->op = GuardExpr::Op::Literal;
                g->literal = std::strtod(cur_.text.c_str(), nullptr);
                advance();
                return g;
            case Token::Kind::String:
                g->op = GuardExpr::Op::Literal;
                g->literal = cur_.text;
                advance();
                return g;
            case Token::Kind::Ident:
                if (cur_.text == "true" || cur_.text == "false") {
                    g->op = GuardExpr::Op::Literal;
                    g->literal = (cur_.text == "true");
                } else if (cur_.text == "AND" || cur_.text == "OR" || cur_.text == "NOT") {
                    fail("operator '" + cur_.text + "' where an operand was expected");
                    return g;
                } else {
                    g->op = GuardExpr::Op::Ref;
                    g->ref = cur_.text;
                }
                advance();
                return g;
            default:
                fail("unexpected end of guard expression");
                return g;
        }
    }

    Lexer lex_;
    Token cur_;
    std::string error_;
};

int precedence(GuardExpr::Op op) {
    switch (op) {
        case GuardExpr::Op::Or: return 1;
        case GuardExpr::Op::And: return 2;
        case GuardExpr::Op::Not: return 3;
        case GuardExpr::Op::Lt:
        case GuardExpr::Op::Gt:
        case GuardExpr::Op::Eq:
        case GuardExpr::Op::Ne: return 4;
        default: return 5;
    }
}

void render(const GuardExpr& g, std::string& out, int parent_prec) {
    const int prec = precedence(g.op);
    const bool parens = prec < parent_prec;
    if (parens) out += "(";
    switch (g.op) {
        case GuardExpr::Op::Literal: out += value_to_text(g.literal); break;
        case GuardExpr::Op::Ref: out += g.ref; break;
        case GuardExpr::Op::Not:
            out += "NOT ";
            render(*g.lhs, out, prec + 1);
            break;
        case GuardExpr::Op::And:
        case GuardExpr::Op::Or: {
            render(*g.lhs, out, prec);
            out += (g.op == GuardExpr::Op::And) ? " AND " : " OR ";
            render(*g.rhs, out, prec + 1);
            break;
        }
        default: {
            render(*g.lhs, out, prec + 1);
            switch (g.op) {
                case GuardExpr::Op::Lt: out += " < "; break;
                case GuardExpr::Op::Gt: out += " > "; break;
                case GuardExpr::Op::Eq: out += " == "; break;
                case GuardExpr::Op::Ne: out += " != "; break;
                default: break;
            }
            render(*g.rhs, out, prec + 1);
            break;
        }
    }
    if (parens) out += ")";
}

void collect_refs(const GuardExpr& g, std::vector<std::string>& out) {
    if (g.op == GuardExpr::Op::Ref) {
        for (const auto& r : out)
            if (r == g.ref) return;
        out.push_back(g.ref);
        return;
    }
    if (g.lhs) collect_refs(*g.lhs, out);
    if (g.rhs) collect_refs(*g.rhs, out);
}

Value eval_value(const GuardExpr& g, const GuardEnv& env);

bool eval_bool(const GuardExpr& g, const GuardEnv& env) {
    const Value v = eval_value(g, env);
    if (const bool* b = std::get_if<bool>(&v)) return *b;
    throw GuardEvalError("guard term is not boolean");
}

bool values_equal(const Value& a, const Value& b) {
    const auto na = numeric_view(a);
    const auto nb = numeric_view(b);
    if (na && nb) return *na == *nb;
    if (kind_of(a) != kind_of(b)) throw GuardEvalError("comparing values of different kinds");
    return a == b;
}

Value eval_value(const GuardExpr& g, const GuardEnv& env) {
    switch (g.op) {
        case GuardExpr::Op::Literal: return g.literal;
        case GuardExpr::Op::Ref: {
            auto v = env(g.ref);
            if (!v) throw GuardEvalError("undeclared name '" + g.ref + "' in guard");
            return *v;
        }
        case GuardExpr::Op::Not: return !eval_bool(*g.lhs, env);
        case GuardExpr::Op::And: return eval_bool(*g.lhs, env) && eval_bool(*g.rhs, env);
        case GuardExpr::Op::Or: return eval_bool(*g.lhs, env) || eval_bool(*g.rhs, env);
        case GuardExpr::Op::Eq: return values_equal(eval_value(*g.lhs, env), eval_value(*g.rhs, env));
        case GuardExpr::Op::Ne: return !values_equal(eval_value(*g.lhs, env), eval_value(*g.rhs, env));
        case GuardExpr::Op::Lt:
        case GuardExpr::Op::Gt: {
            const auto l = numeric_view(eval_value(*g.lhs, env));
            const auto r = numeric_view(eval_value(*g.rhs, env));
            if (!l || !r) throw GuardEvalError("ordered comparison on non-numeric values");
            return g.op == GuardExpr::Op::Lt ? (*l < *r) : (*l > *r);
        }
    }
    throw GuardEvalError("malformed guard expression");
}

}  // namespace

GuardParseResult parse_guard(const std::string& text) {
    Parser p(text);
    GuardParseResult res;
    res.expr = p.parse(res.error);
    if (!res.error.empty()) res.expr = nullptr;
    return res;
}

std::string guard_to_text(const GuardExpr& g) {
    std::string out;
    render(g, out, 0);
    return out;
}

std::vector<std::string> guard_refs(const GuardExpr& g) {
    std::vector<std::string> out;
    collect_refs(g, out);
    return out;
}

bool eval_guard(const GuardExpr& g, const GuardEnv& env) {
    const Value v = eval_value(g, env);
    if (const bool* b = std::get_if<bool>(&v)) return *b;
    throw GuardEvalError("guard does not evaluate to a boolean");
}

}  // namespace fbsec
