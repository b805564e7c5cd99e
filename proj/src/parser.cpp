#include "fbsec/parser.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "fbsec/guard.hpp"
#include "fbsec/services.hpp"

namespace fbsec::fbs {

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

struct Token {
    enum class Kind {
        Ident, Int, Float, String, HexBytes,
        LBrace, RBrace, LParen, RParen, LBracket, RBracket,
        Colon, Semi, Comma, Dot, Arrow, Assign, At, InitAssign,
        Cmp,  // <  >  ==  != (guard-expression operators)
        End, Bad
    } kind = Kind::End;
    std::string text;
    SourceSpan span;
};

class Lexer {
public:
    Lexer(const std::string& src, std::string filename)
        : src_(src), file_(std::move(filename)) {}

    Token next() {
        skip_ws_and_comments();
        Token tok;
        tok.span = {file_, line_, col_, 1};
        if (pos_ >= src_.size()) {
            tok.kind = Token::Kind::End;
            return tok;
        }
        const char c = src_[pos_];

        auto punct = [&](Token::Kind k, int len, const char* text) {
            tok.kind = k;
            tok.text = text;
            tok.span.length = len;
            advance(len);
            return tok;
        };

        if (c == '{') return punct(Token::Kind::LBrace, 1, "{");
        if (c == '}') return punct(Token::Kind::RBrace, 1, "}");
        if (c == '(') return punct(Token::Kind::LParen, 1, "(");
        if (c == ')') return punct(Token::Kind::RParen, 1, ")");
        if (c == '[') return punct(Token::Kind::LBracket, 1, "[");
        if (c == ']') return punct(Token::Kind::RBracket, 1, "]");
        if (c == ':' && peek(1) == '=') return punct(Token::Kind::InitAssign, 2, ":=");
        if (c == ':') return punct(Token::Kind::Colon, 1, ":");
        if (c == ';') return punct(Token::Kind::Semi, 1, ";");
        if (c == ',') return punct(Token::Kind::Comma, 1, ",");
        if (c == '.') return punct(Token::Kind::Dot, 1, ".");
        if (c == '@') return punct(Token::Kind::At, 1, "@");
        if (c == '=' && peek(1) == '=') return punct(Token::Kind::Cmp, 2, "==");
        if (c == '!' && peek(1) == '=') return punct(Token::Kind::Cmp, 2, "!=");
        if (c == '<') return punct(Token::Kind::Cmp, 1, "<");
        if (c == '>') return punct(Token::Kind::Cmp, 1, ">");
        if (c == '=') return punct(Token::Kind::Assign, 1, "=");
        if (c == '-' && peek(1) == '>') return punct(Token::Kind::Arrow, 2, "->");

        if (c == 'x' && peek(1) == '"') return lex_hex_bytes(tok);
        if (c == '"') return lex_string(tok);
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && std::isdigit(static_cast<unsigned char>(peek(1)))))
            return lex_number(tok);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_ident(tok);

        tok.kind = Token::Kind::Bad;
        tok.text = std::string(1, c);
        advance(1);
        return tok;
    }

    const std::string& file() const { return file_; }

private:
    char peek(int ahead) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void advance(int n) {
        for (int i = 0; i < n && pos_ < src_.size(); ++i) {
            if (src_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }

    void skip_ws_and_comments() {
        for (;;) {
            while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
                advance(1);
            if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance(1);
                continue;
            }
            break;
        }
    }

    Token lex_string(Token tok) {
        advance(1);  // opening quote
        std::string out;
        while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') {
            if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
                advance(1);
                switch (src_[pos_]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    default: out += src_[pos_];
                }
            } else {
                out += src_[pos_];
            }
            advance(1);
        }
        if (pos_ >= src_.size() || src_[pos_] != '"') {
            tok.kind = Token::Kind::Bad;
            tok.text = "unterminated string";
            return tok;
        }
        advance(1);
        tok.kind = Token::Kind::String;
        tok.text = std::move(out);
        tok.span.length = col_ - tok.span.column;
        return tok;
    }

    Token lex_hex_bytes(Token tok) {
        advance(2);  // x"
        std::string hex;
        while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') {
            hex += src_[pos_];
            advance(1);
        }
        if (pos_ >= src_.size() || src_[pos_] != '"') {
            tok.kind = Token::Kind::Bad;
            tok.text = "unterminated byte literal";
            return tok;
        }
        advance(1);
        tok.kind = Token::Kind::HexBytes;
        tok.text = std::move(hex);
        tok.span.length = col_ - tok.span.column;
        return tok;
    }

    Token lex_number(Token tok) {
        std::string text;
        bool is_float = false;
        if (src_[pos_] == '-') {
            text += '-';
            advance(1);
        }
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c))) {
                text += c;
            } else if (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
                is_float = true;
                text += c;
            } else if ((c == 'e' || c == 'E') &&
                       (std::isdigit(static_cast<unsigned char>(peek(1))) ||
                        ((peek(1) == '+' || peek(1) == '-') &&
                         std::isdigit(static_cast<unsigned char>(peek(2)))))) {
                is_float = true;
                text += c;
                advance(1);
                text += src_[pos_];
            } else {
                break;
            }
            advance(1);
        }
        tok.kind = is_float ? Token::Kind::Float : Token::Kind::Int;
        tok.text = std::move(text);
        tok.span.length = col_ - tok.span.column;
        return tok;
    }

    Token lex_ident(Token tok) {
        std::string text;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            text += src_[pos_];
            advance(1);
        }
        tok.kind = Token::Kind::Ident;
        tok.text = std::move(text);
        tok.span.length = col_ - tok.span.column;
        return tok;
    }

    const std::string& src_;
    std::string file_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
public:
    Parser(const std::string& text, const std::string& filename)
        : lex_(text, filename) {
        cur_ = lex_.next();
    }

    ParseResult run() {
        Application app;
        app.fb_types = rt::standard_library();

        while (cur_.kind != Token::Kind::End && !fatal_) {
            if (!at_ident()) {
                error_here("expected a top-level section (fbtype, app, devices, map)");
                break;
            }
            const std::string section = cur_.text;
            if (section == "fbtype") {
                parse_fbtype(app);
            } else if (section == "app") {
                advance();
                parse_network_block(app.root, true, app);
            } else if (section == "devices") {
                parse_devices(app);
            } else if (section == "map") {
                parse_map(app);
            } else {
                error_here("unknown section '" + section + "'");
                break;
            }
        }

        resolve(app);

        ParseResult res;
        res.diags = std::move(diags_);
        if (!has_errors(res.diags)) res.app = std::move(app);
        return res;
    }

private:
    bool at_ident() const { return cur_.kind == Token::Kind::Ident; }
    bool at_kw(const char* kw) const { return at_ident() && cur_.text == kw; }

    void advance() { cur_ = lex_.next(); }

    void error_here(const std::string& msg) {
        diags_.push_back({Severity::Error, "", msg, cur_.span});
        fatal_ = true;
    }

    void soft_error(const SourceSpan& span, const std::string& msg) {
        diags_.push_back({Severity::Error, "", msg, span});
    }

    bool expect(Token::Kind kind, const char* what) {
        if (cur_.kind != kind) {
            error_here(std::string("expected ") + what);
            return false;
        }
        advance();
        return true;
    }

    std::optional<std::string> expect_ident(const char* what) {
        if (!at_ident()) {
            error_here(std::string("expected ") + what);
            return std::nullopt;
        }
        std::string name = cur_.text;
        advance();
        return name;
    }

    bool expect_kw(const char* kw) {
        if (!at_kw(kw)) {
            error_here(std::string("expected '") + kw + "'");
            return false;
        }
        advance();
        return true;
    }

    std::optional<Value> parse_literal() {
        switch (cur_.kind) {
            case Token::Kind::Int: {
                std::int64_t v = 0;
                std::from_chars(cur_.text.data(), cur_.text.data() + cur_.text.size(), v);
                advance();
                return Value{v};
            }
            case Token::Kind::Float: {
                const double v = std::strtod(cur_.text.c_str(), nullptr);
                advance();
                return Value{v};
            }
            case Token::Kind::String: {
                std::string v = cur_.text;
                advance();
                return Value{std::move(v)};
            }
            case Token::Kind::HexBytes: {
                byte_vec bytes;
                try {
                    bytes = from_hex(cur_.text);
                } catch (const std::exception&) {
                    error_here("invalid hex in byte literal");
                    return std::nullopt;
                }
                if (bytes.size() != 16) {
                    error_here("byte literal must contain exactly 16 bytes");
                    return std::nullopt;
                }
                Block16 blk;
                std::copy(bytes.begin(), bytes.end(), blk.begin());
                advance();
                return Value{blk};
            }
            case Token::Kind::Ident:
                if (cur_.text == "true" || cur_.text == "false") {
                    const bool v = cur_.text == "true";
                    advance();
                    return Value{v};
                }
                [[fallthrough]];
            default:
                error_here("expected a literal value");
                return std::nullopt;
        }
    }

    // ---- fbtype ----------------------------------------------------------

    void parse_fbtype(Application& app) {
        advance();  // fbtype
        const SourceSpan name_span = cur_.span;
        auto name = expect_ident("FB type name");
        if (!name) return;

        FBType t;
        t.name = *name;
        if (at_kw("basic")) {
            t.kind = FBKind::Basic;
            t.ecc.emplace();
            advance();
        } else if (at_kw("composite")) {
            t.kind = FBKind::Composite;
            t.network.emplace();
            advance();
        } else if (at_kw("sifb")) {
            t.kind = FBKind::Sifb;
            advance();
            auto service = expect_ident("service name");
            if (!service) return;
            t.service = *service;
        } else {
            error_here("expected FB kind: basic, composite or sifb");
            return;
        }

        if (!expect(Token::Kind::LBrace, "'{'")) return;
        while (!fatal_ && cur_.kind != Token::Kind::RBrace && cur_.kind != Token::Kind::End) {
            if (at_kw("event")) {
                parse_event_decl(t);
            } else if (at_kw("data")) {
                parse_data_decl(t);
            } else if (at_kw("internal")) {
                parse_internal_decl(t);
            } else if (at_kw("ecc")) {
                if (t.kind != FBKind::Basic) {
                    error_here("only basic FBs declare an ecc block");
                    return;
                }
                parse_ecc(*t.ecc);
            } else if (at_kw("network")) {
                if (t.kind != FBKind::Composite) {
                    error_here("only composite FBs declare a network block");
                    return;
                }
                advance();
                parse_network_block(*t.network, false, app);
            } else {
                error_here("unexpected item in fbtype body");
                return;
            }
        }
        expect(Token::Kind::RBrace, "'}'");

        if (rt::is_standard_type(t.name))
            soft_error(name_span, "fbtype '" + t.name + "' redefines a built-in type");
        else if (app.fb_types.count(t.name))
            soft_error(name_span, "fbtype '" + t.name + "' defined twice");
        else
            app.fb_types[t.name] = std::move(t);
    }

    void parse_event_decl(FBType& t) {
        advance();  // event
        bool input;
        if (at_kw("input")) {
            input = true;
        } else if (at_kw("output")) {
            input = false;
        } else {
            error_here("expected 'input' or 'output'");
            return;
        }
        advance();
        auto name = expect_ident("event name");
        if (!name) return;
        if (at_kw("with")) {
            advance();
            std::vector<std::string> ports;
            for (;;) {
                auto port = expect_ident("data port name");
                if (!port) return;
                ports.push_back(*port);
                if (cur_.kind != Token::Kind::Comma) break;
                advance();
            }
            t.interface.with_assoc[*name] = std::move(ports);
        }
        if (input)
            t.interface.event_inputs.push_back(*name);
        else
            t.interface.event_outputs.push_back(*name);
        expect(Token::Kind::Semi, "';'");
    }

    void parse_data_decl(FBType& t) {
        advance();  // data
        bool input;
        if (at_kw("input")) {
            input = true;
        } else if (at_kw("output")) {
            input = false;
        } else {
            error_here("expected 'input' or 'output'");
            return;
        }
        advance();
        auto name = expect_ident("data port name");
        if (!name) return;
        if (!expect(Token::Kind::Colon, "':'")) return;
        auto kind_name_tok = expect_ident("data kind");
        if (!kind_name_tok) return;
        auto kind = kind_from_name(*kind_name_tok);
        if (!kind) {
            error_here("unknown data kind '" + *kind_name_tok + "'");
            return;
        }
        if (input)
            t.interface.data_inputs.emplace_back(*name, *kind);
        else
            t.interface.data_outputs.emplace_back(*name, *kind);
        expect(Token::Kind::Semi, "';'");
    }

    void parse_internal_decl(FBType& t) {
        if (t.kind != FBKind::Basic) {
            error_here("only basic FBs declare internal variables");
            return;
        }
        advance();  // internal
        auto name = expect_ident("internal variable name");
        if (!name) return;
        if (!expect(Token::Kind::Colon, "':'")) return;
        auto kind_name_tok = expect_ident("data kind");
        if (!kind_name_tok) return;
        auto kind = kind_from_name(*kind_name_tok);
        if (!kind) {
            error_here("unknown data kind '" + *kind_name_tok + "'");
            return;
        }
        InternalVar var{*name, *kind, std::nullopt};
        if (cur_.kind == Token::Kind::InitAssign) {
            advance();
            auto lit = parse_literal();
            if (!lit) return;
            auto coerced = coerce_literal(*lit, *kind);
            if (!coerced) {
                error_here("initialiser does not fit kind " + std::string(kind_name(*kind)));
                return;
            }
            var.init = *coerced;
        }
        t.ecc->internal_vars.push_back(std::move(var));
        expect(Token::Kind::Semi, "';'");
    }

    // ---- ecc -------------------------------------------------------------

    void parse_ecc(Ecc& ecc) {
        advance();  // ecc
        if (!expect(Token::Kind::LBrace, "'{'")) return;
        while (!fatal_ && cur_.kind != Token::Kind::RBrace && cur_.kind != Token::Kind::End) {
            if (at_kw("initial")) {
                advance();
                auto name = expect_ident("state name");
                if (!name) return;
                ecc.initial = *name;
                expect(Token::Kind::Semi, "';'");
            } else if (at_kw("state")) {
                advance();
                auto name = expect_ident("state name");
                if (!name) return;
                ecc.states.push_back(*name);
                if (cur_.kind == Token::Kind::LBrace) {
                    advance();
                    while (!fatal_ && cur_.kind != Token::Kind::RBrace &&
                           cur_.kind != Token::Kind::End)
                        parse_action(ecc, *name);
                    expect(Token::Kind::RBrace, "'}'");
                } else {
                    expect(Token::Kind::Semi, "';'");
                }
            } else if (at_kw("transition")) {
                parse_transition(ecc);
            } else {
                error_here("unexpected item in ecc block");
                return;
            }
        }
        expect(Token::Kind::RBrace, "'}'");
    }

    void parse_action(Ecc& ecc, const std::string& state) {
        EccAction action;
        if (at_kw("run")) {
            advance();
            auto alg = expect_ident("algorithm name");
            if (!alg) return;
            action.algorithm = *alg;
            if (at_kw("emit")) {
                advance();
                auto ev = expect_ident("event name");
                if (!ev) return;
                action.emit = *ev;
            }
        } else if (at_kw("emit")) {
            advance();
            auto ev = expect_ident("event name");
            if (!ev) return;
            action.emit = *ev;
        } else {
            error_here("expected 'run' or 'emit' in state action");
            return;
        }
        ecc.actions[state].push_back(std::move(action));
        expect(Token::Kind::Semi, "';'");
    }

    void parse_transition(Ecc& ecc) {
        advance();  // transition
        EccTransition tr;
        auto from = expect_ident("source state");
        if (!from) return;
        tr.from = *from;
        if (!expect(Token::Kind::Arrow, "'->'")) return;
        auto to = expect_ident("target state");
        if (!to) return;
        tr.to = *to;
        if (at_kw("on")) {
            advance();
            auto ev = expect_ident("trigger event");
            if (!ev) return;
            tr.trigger = *ev;
        }
        if (cur_.kind == Token::Kind::LBracket) {
            const SourceSpan guard_span = cur_.span;
            advance();
            // Re-render guard tokens into text, then normalise through the
            // guard parser so serialization is canonical.
            std::string text;
            while (cur_.kind != Token::Kind::RBracket && cur_.kind != Token::Kind::End) {
                if (!text.empty()) text += " ";
                if (cur_.kind == Token::Kind::String)
                    text += value_to_text(Value{cur_.text});
                else
                    text += cur_.text;
                advance();
            }
            if (!expect(Token::Kind::RBracket, "']'")) return;
            auto parsed = parse_guard(text);
            if (!parsed.expr) {
                soft_error(guard_span, "bad guard expression: " + parsed.error);
                return;
            }
            tr.guard = guard_to_text(*parsed.expr);
        }
        ecc.transitions.push_back(std::move(tr));
        expect(Token::Kind::Semi, "';'");
    }

    // ---- networks --------------------------------------------------------

    std::optional<PortRef> parse_endpoint(SourceSpan* span_out) {
        if (span_out) *span_out = cur_.span;
        auto first = expect_ident("connection endpoint");
        if (!first) return std::nullopt;
        PortRef ref;
        if (cur_.kind == Token::Kind::Dot) {
            advance();
            auto port = expect_ident("port name");
            if (!port) return std::nullopt;
            ref.instance = *first;
            ref.port = *port;
        } else {
            ref.port = *first;  // boundary reference
        }
        return ref;
    }

    void parse_network_block(FBNetwork& net, bool is_app, Application& app) {
        // (instance name, use span) pairs checked once the block is complete,
        // so declaration order inside the block does not matter.
        std::vector<std::pair<std::string, SourceSpan>> endpoint_uses;

        if (!expect(Token::Kind::LBrace, "'{'")) return;
        while (!fatal_ && cur_.kind != Token::Kind::RBrace && cur_.kind != Token::Kind::End) {
            if (at_kw("instance")) {
                advance();
                const SourceSpan name_span = cur_.span;
                auto name = expect_ident("instance name");
                if (!name) return;
                if (!expect(Token::Kind::Colon, "':'")) return;
                const SourceSpan type_span = cur_.span;
                auto type = expect_ident("FB type name");
                if (!type) return;
                if (net.has_instance(*name))
                    soft_error(name_span, "instance '" + *name + "' declared twice");
                else
                    net.add_instance(*name, *type);
                pending_instance_refs_.push_back({*type, type_span});
                expect(Token::Kind::Semi, "';'");
            } else if (at_kw("event")) {
                advance();
                SourceSpan from_span, to_span;
                auto from = parse_endpoint(&from_span);
                if (!from) return;
                if (!expect(Token::Kind::Arrow, "'->'")) return;
                auto to = parse_endpoint(&to_span);
                if (!to) return;
                if (!from->is_boundary()) endpoint_uses.push_back({from->instance, from_span});
                if (!to->is_boundary()) endpoint_uses.push_back({to->instance, to_span});
                net.event_conns.push_back({*from, *to});
                expect(Token::Kind::Semi, "';'");
            } else if (at_kw("data")) {
                advance();
                SourceSpan from_span, to_span;
                auto from = parse_endpoint(&from_span);
                if (!from) return;
                if (!expect(Token::Kind::Arrow, "'->'")) return;
                auto to = parse_endpoint(&to_span);
                if (!to) return;
                if (!from->is_boundary()) endpoint_uses.push_back({from->instance, from_span});
                if (!to->is_boundary()) endpoint_uses.push_back({to->instance, to_span});
                net.data_conns.push_back({*from, *to});
                if (cur_.kind == Token::Kind::At) parse_annotation(app, net.data_conns.back(), is_app);
                expect(Token::Kind::Semi, "';'");
            } else if (at_kw("param")) {
                advance();
                const SourceSpan inst_span = cur_.span;
                auto inst = expect_ident("instance name");
                if (!inst) return;
                if (!expect(Token::Kind::Dot, "'.'")) return;
                auto port = expect_ident("data input name");
                if (!port) return;
                if (!expect(Token::Kind::Assign, "'='")) return;
                auto lit = parse_literal();
                if (!lit) return;
                endpoint_uses.push_back({*inst, inst_span});
                net.param_bindings[{*inst, *port}] = *lit;
                expect(Token::Kind::Semi, "';'");
            } else {
                error_here("unexpected item in network");
                return;
            }
        }
        expect(Token::Kind::RBrace, "'}'");

        for (const auto& [inst, span] : endpoint_uses) {
            if (!net.has_instance(inst))
                soft_error(span, "dangling reference to undeclared instance '" + inst + "'");
        }
        (void)is_app;
    }

    void parse_annotation(Application& app, const DataConn& conn, bool is_app) {
        AnnotationAst ast;
        ast.span = cur_.span;
        advance();  // @
        auto keyword = expect_ident("annotation keyword");
        if (!keyword) return;
        ast.keyword = *keyword;
        if (!expect(Token::Kind::LParen, "'('")) return;

        // Each argument is the concatenation of its tokens, so key=value and
        // suffixed durations (rekey=60s) come through as single raw tokens.
        while (cur_.kind != Token::Kind::RParen && cur_.kind != Token::Kind::End) {
            std::string arg;
            const SourceSpan arg_span = cur_.span;
            while (cur_.kind != Token::Kind::Comma && cur_.kind != Token::Kind::RParen &&
                   cur_.kind != Token::Kind::End) {
                arg += cur_.text;
                advance();
            }
            if (arg.empty())
                soft_error(arg_span, "empty annotation argument");
            else
                ast.args.push_back(arg);
            if (cur_.kind == Token::Kind::Comma) advance();
        }
        if (!expect(Token::Kind::RParen, "')'")) return;

        if (!is_app) {
            soft_error(ast.span, "secure annotations are only valid in the app block");
            return;
        }
        if (ast.keyword != "secure") {
            soft_error(ast.span, "unknown annotation '@" + ast.keyword + "'");
            return;
        }
        auto parsed = parse_secure_annotation(ast);
        for (auto& d : parsed.diags) diags_.push_back(d);
        if (!parsed.fragment) return;

        SecureLink link;
        link.d_con = conn;
        link.goal = parsed.fragment->goal;
        link.alg = parsed.fragment->alg;
        link.params = parsed.fragment->params;
        app.secure_links.push_back(std::move(link));
    }

    // ---- devices / map ---------------------------------------------------

    void parse_devices(Application& app) {
        advance();  // devices
        if (!expect(Token::Kind::LBrace, "'{'")) return;
        while (!fatal_ && cur_.kind != Token::Kind::RBrace && cur_.kind != Token::Kind::End) {
            auto name = expect_ident("device name");
            if (!name) return;
            app.devices.push_back(*name);
            expect(Token::Kind::Semi, "';'");
        }
        expect(Token::Kind::RBrace, "'}'");
    }

    void parse_map(Application& app) {
        advance();  // map
        if (!expect(Token::Kind::LBrace, "'{'")) return;
        while (!fatal_ && cur_.kind != Token::Kind::RBrace && cur_.kind != Token::Kind::End) {
            const SourceSpan span = cur_.span;
            auto inst = expect_ident("instance name");
            if (!inst) return;
            if (!expect(Token::Kind::Arrow, "'->'")) return;
            auto dev = expect_ident("device name");
            if (!dev) return;
            if (app.mapping.count(*inst))
                soft_error(span, "instance '" + *inst + "' mapped twice");
            app.mapping[*inst] = *dev;
            expect(Token::Kind::Semi, "';'");
        }
        expect(Token::Kind::RBrace, "'}'");
    }

    // ---- resolution ------------------------------------------------------

    // Coerce parameter literals to the declared kind of their target port
    // (integer literals narrow/widen to UINT, BYTE, LREAL). Mismatches are
    // left alone for the validator to report.
    void coerce_params(FBNetwork& net, const Application& app) {
        for (auto& [key, value] : net.param_bindings) {
            const std::string* type_name = net.type_of(key.first);
            if (!type_name) continue;
            const FBType* t = app.find_type(*type_name);
            if (!t) continue;
            auto kind = t->interface.data_input_kind(key.second);
            if (!kind || kind_of(value) == *kind) continue;
            if (auto coerced = coerce_literal(value, *kind)) value = *coerced;
        }
    }

    void resolve(Application& app) {
        for (const auto& [type, span] : pending_instance_refs_) {
            if (!app.fb_types.count(type)) soft_error(span, "unknown FB type '" + type + "'");
        }
        coerce_params(app.root, app);
        for (auto& [name, type] : app.fb_types)
            if (type.kind == FBKind::Composite && type.network) coerce_params(*type.network, app);
        // Root networks have no boundary to refer to.
        for (const auto& c : app.root.event_conns)
            if (c.from.is_boundary() || c.to.is_boundary())
                soft_error({lex_.file(), 1, 1, 0},
                           "boundary reference in the app block has nothing to bind to");
        for (const auto& c : app.root.data_conns)
            if (c.from.is_boundary() || c.to.is_boundary())
                soft_error({lex_.file(), 1, 1, 0},
                           "boundary reference in the app block has nothing to bind to");
    }

    Lexer lex_;
    Token cur_;
    std::vector<Diagnostic> diags_;
    std::vector<std::pair<std::string, SourceSpan>> pending_instance_refs_;
    bool fatal_ = false;
};

// ---------------------------------------------------------------------------
// Serializer
// ---------------------------------------------------------------------------

std::string endpoint_text(const PortRef& ref) { return ref.str(); }

std::string annotation_text(const SecureLink& link) {
    std::string goal;
    switch (link.goal) {
        case SecGoal::Confidentiality: goal = "C"; break;
        case SecGoal::Integrity: goal = "I"; break;
        case SecGoal::Availability: goal = "A"; break;
    }
    std::string out = " @secure(" + goal + ", " + link.alg;
    for (const auto& [key, value] : link.params) {
        out += ", " + key + "=";
        if (key == "rekey") {
            const auto ms = link.rekey_ms().value_or(0);
            if (ms % 1000 == 0)
                out += std::to_string(ms / 1000) + "s";
            else
                out += std::to_string(ms) + "ms";
        } else if (const auto* s = std::get_if<std::string>(&value)) {
            out += *s;  // identifiers (channel tags, alg params)
        } else if (const auto* u = std::get_if<std::uint64_t>(&value)) {
            out += std::to_string(*u);
        } else {
            out += value_to_text(value);
        }
    }
    return out + ")";
}

void write_interface(std::ostringstream& os, const FBInterface& itf, const std::string& indent) {
    auto assoc_suffix = [&](const std::string& event) -> std::string {
        auto it = itf.with_assoc.find(event);
        if (it == itf.with_assoc.end() || it->second.empty()) return "";
        std::string out = " with ";
        for (std::size_t i = 0; i < it->second.size(); ++i) {
            if (i) out += ", ";
            out += it->second[i];
        }
        return out;
    };
    for (const auto& ev : itf.event_inputs)
        os << indent << "event input " << ev << assoc_suffix(ev) << ";\n";
    for (const auto& ev : itf.event_outputs)
        os << indent << "event output " << ev << assoc_suffix(ev) << ";\n";
    for (const auto& [name, kind] : itf.data_inputs)
        os << indent << "data input " << name << ": " << kind_name(kind) << ";\n";
    for (const auto& [name, kind] : itf.data_outputs)
        os << indent << "data output " << name << ": " << kind_name(kind) << ";\n";
}

void write_network(std::ostringstream& os, const FBNetwork& net, const Application* app,
                   const std::string& indent) {
    for (const auto& [name, type] : net.instances)
        os << indent << "instance " << name << ": " << type << ";\n";
    for (const auto& [key, value] : net.param_bindings)
        os << indent << "param " << key.first << "." << key.second << " = " << value_to_text(value)
           << ";\n";
    for (const auto& conn : net.event_conns)
        os << indent << "event " << endpoint_text(conn.from) << " -> " << endpoint_text(conn.to)
           << ";\n";
    for (const auto& conn : net.data_conns) {
        os << indent << "data " << endpoint_text(conn.from) << " -> " << endpoint_text(conn.to);
        if (app) {
            for (const auto& link : app->secure_links) {
                if (link.d_con == conn) {
                    os << annotation_text(link);
                    break;
                }
            }
        }
        os << ";\n";
    }
}

void write_fbtype(std::ostringstream& os, const FBType& t) {
    os << "fbtype " << t.name << " ";
    switch (t.kind) {
        case FBKind::Basic: os << "basic"; break;
        case FBKind::Composite: os << "composite"; break;
        case FBKind::Sifb: os << "sifb " << t.service; break;
    }
    os << " {\n";
    write_interface(os, t.interface, "  ");

    if (t.kind == FBKind::Basic && t.ecc) {
        for (const auto& var : t.ecc->internal_vars) {
            os << "  internal " << var.name << ": " << kind_name(var.kind);
            if (var.init) os << " := " << value_to_text(*var.init);
            os << ";\n";
        }
        os << "  ecc {\n";
        os << "    initial " << t.ecc->initial << ";\n";
        for (const auto& state : t.ecc->states) {
            auto actions = t.ecc->actions.find(state);
            if (actions == t.ecc->actions.end() || actions->second.empty()) {
                os << "    state " << state << ";\n";
                continue;
            }
            os << "    state " << state << " {";
            for (const auto& a : actions->second) {
                os << " ";
                if (!a.algorithm.empty()) {
                    os << "run " << a.algorithm;
                    if (a.emit) os << " emit " << *a.emit;
                } else if (a.emit) {
                    os << "emit " << *a.emit;
                }
                os << ";";
            }
            os << " }\n";
        }
        for (const auto& tr : t.ecc->transitions) {
            os << "    transition " << tr.from << " -> " << tr.to;
            if (tr.trigger) os << " on " << *tr.trigger;
            if (tr.guard) os << " [" << *tr.guard << "]";
            os << ";\n";
        }
        os << "  }\n";
    }
    if (t.kind == FBKind::Composite && t.network) {
        os << "  network {\n";
        write_network(os, *t.network, nullptr, "    ");
        os << "  }\n";
    }
    os << "}\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// parse_secure_annotation
// ---------------------------------------------------------------------------

AnnotationParseResult parse_secure_annotation(const AnnotationAst& ast) {
    AnnotationParseResult res;
    auto fail = [&](const std::string& msg) {
        res.diags.push_back({Severity::Error, "@secure", msg, ast.span});
    };

    if (ast.args.size() < 2) {
        fail("@secure needs at least a goal and an algorithm");
        return res;
    }

    SecureLinkFragment frag;
    const std::string& goal = ast.args[0];
    if (goal == "C") {
        frag.goal = SecGoal::Confidentiality;
    } else if (goal == "I") {
        frag.goal = SecGoal::Integrity;
    } else if (goal == "A") {
        frag.goal = SecGoal::Availability;
    } else {
        fail("unknown security goal " + goal);
        return res;
    }
    frag.alg = ast.args[1];

    for (std::size_t i = 2; i < ast.args.size(); ++i) {
        const std::string& arg = ast.args[i];
        const auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 >= arg.size()) {
            fail("annotation parameter '" + arg + "' is not key=value");
            return res;
        }
        const std::string key = arg.substr(0, eq);
        std::string value = arg.substr(eq + 1);
        if (frag.params.count(key)) {
            fail("duplicate annotation parameter '" + key + "'");
            return res;
        }

        // Numeric values, with s/ms duration suffixes normalised to
        // milliseconds; anything else stays a string.
        auto all_digits = [](const std::string& s) {
            return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
        };
        std::uint64_t scale = 0;
        std::string digits;
        if (value.size() > 2 && value.ends_with("ms") &&
            all_digits(value.substr(0, value.size() - 2))) {
            digits = value.substr(0, value.size() - 2);
            scale = 1;
        } else if (value.size() > 1 && value.ends_with("s") &&
                   all_digits(value.substr(0, value.size() - 1))) {
            digits = value.substr(0, value.size() - 1);
            scale = 1000;
        } else if (all_digits(value)) {
            digits = value;
            scale = 1;
        }
        if (scale)
            frag.params[key] = static_cast<std::uint64_t>(std::stoull(digits)) * scale;
        else
            frag.params[key] = value;
    }

    if (frag.goal == SecGoal::Confidentiality && frag.alg == "AES") {
        if (!frag.params.count("keysize")) frag.params["keysize"] = kDefaultKeysizeBits;
        if (!frag.params.count("rekey")) frag.params["rekey"] = kDefaultRekeyMs;
    }

    res.fragment = std::move(frag);
    return res;
}

ParseResult parse_application(const std::string& text, const std::string& filename) {
    return Parser(text, filename).run();
}

std::string serialize_application(const Application& app) {
    std::ostringstream os;

    for (const auto& [name, type] : app.fb_types) {
        if (rt::is_standard_type(name)) continue;
        write_fbtype(os, type);
        os << "\n";
    }

    os << "app {\n";
    write_network(os, app.root, &app, "  ");
    os << "}\n\n";

    os << "devices {\n";
    for (const auto& dev : app.devices) os << "  " << dev << ";\n";
    os << "}\n\n";

    os << "map {\n";
    for (const auto& [inst, dev] : app.mapping) os << "  " << inst << " -> " << dev << ";\n";
    os << "}\n";

    return os.str();
}

}  // namespace fbsec::fbs
