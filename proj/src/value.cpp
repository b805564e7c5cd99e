#include "fbsec/value.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace fbsec {

DataKind kind_of(const Value& v) {
    return static_cast<DataKind>(v.index());
}

Value default_value(DataKind kind) {
    switch (kind) {
        case DataKind::Bool: return false;
        case DataKind::Int: return std::int64_t{0};
        case DataKind::Uint: return std::uint64_t{0};
        case DataKind::LReal: return 0.0;
        case DataKind::Byte: return std::uint8_t{0};
        case DataKind::Bytes16: return Block16{};
        case DataKind::String: return std::string{};
    }
    return false;
}

const char* kind_name(DataKind kind) {
    switch (kind) {
        case DataKind::Bool: return "BOOL";
        case DataKind::Int: return "INT";
        case DataKind::Uint: return "UINT";
        case DataKind::LReal: return "LREAL";
        case DataKind::Byte: return "BYTE";
        case DataKind::Bytes16: return "BYTES16";
        case DataKind::String: return "STRING";
    }
    return "?";
}

std::optional<DataKind> kind_from_name(const std::string& name) {
    if (name == "BOOL") return DataKind::Bool;
    if (name == "INT") return DataKind::Int;
    if (name == "UINT") return DataKind::Uint;
    if (name == "LREAL") return DataKind::LReal;
    if (name == "BYTE") return DataKind::Byte;
    if (name == "BYTES16") return DataKind::Bytes16;
    if (name == "STRING") return DataKind::String;
    return std::nullopt;
}

std::string value_to_text(const Value& v) {
    struct Visitor {
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(std::uint64_t u) const { return std::to_string(u); }
        std::string operator()(double d) const {
            std::ostringstream os;
            os.precision(17);
            os << d;
            std::string s = os.str();
            if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
                s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
                s += ".0";
            return s;
        }
        std::string operator()(std::uint8_t b) const { return std::to_string(int(b)); }
        std::string operator()(const Block16& blk) const { return "x\"" + to_hex(blk) + "\""; }
        std::string operator()(const std::string& s) const {
            std::string out = "\"";
            for (char c : s) {
                switch (c) {
                    case '"': out += "\\\""; break;
                    case '\\': out += "\\\\"; break;
                    case '\n': out += "\\n"; break;
                    case '\t': out += "\\t"; break;
                    case '\r': out += "\\r"; break;
                    default: out += c;
                }
            }
            return out + "\"";
        }
    };
    return std::visit(Visitor{}, v);
}

std::optional<Value> coerce_literal(const Value& parsed, DataKind want) {
    if (kind_of(parsed) == want) return parsed;

    // Integer literals arrive as INT; widen/narrow to the declared kind.
    if (const auto* i = std::get_if<std::int64_t>(&parsed)) {
        switch (want) {
            case DataKind::Uint:
                if (*i < 0) return std::nullopt;
                return static_cast<std::uint64_t>(*i);
            case DataKind::Byte:
                if (*i < 0 || *i > 255) return std::nullopt;
                return static_cast<std::uint8_t>(*i);
            case DataKind::LReal:
                return static_cast<double>(*i);
            default: return std::nullopt;
        }
    }
    return std::nullopt;
}

std::optional<double> numeric_view(const Value& v) {
    switch (kind_of(v)) {
        case DataKind::Int: return static_cast<double>(std::get<std::int64_t>(v));
        case DataKind::Uint: return static_cast<double>(std::get<std::uint64_t>(v));
        case DataKind::LReal: return std::get<double>(v);
        case DataKind::Byte: return static_cast<double>(std::get<std::uint8_t>(v));
        default: return std::nullopt;
    }
}

}  // namespace fbsec
