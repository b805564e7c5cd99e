#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "fbsec/bytes.hpp"

namespace fbsec {

/// IEC 61131-3 flavoured data kinds carried by data ports. BYTES16 exists for
/// AES blocks (plaintext/ciphertext aliases); STRING doubles as the carrier
/// for hex-encoded variable-length key material.
enum class DataKind { Bool, Int, Uint, LReal, Byte, Bytes16, String };

using Value = std::variant<bool, std::int64_t, std::uint64_t, double, std::uint8_t, Block16, std::string>;

DataKind kind_of(const Value& v);
Value default_value(DataKind kind);

const char* kind_name(DataKind kind);
std::optional<DataKind> kind_from_name(const std::string& name);

/// Literal syntax used by the .fbs format and manifests: true/false, 42,
/// 3.5, "text", x"00ff..". Round-trips through parse_literal.
std::string value_to_text(const Value& v);

/// Parses a literal and coerces it to the requested kind when the shapes are
/// compatible (integer literals fit INT/UINT/BYTE). Returns nullopt on
/// mismatch or out-of-range values.
std::optional<Value> coerce_literal(const Value& parsed, DataKind want);

// Numeric view for guard comparisons; nullopt for non-numeric values.
std::optional<double> numeric_view(const Value& v);

}  // namespace fbsec
