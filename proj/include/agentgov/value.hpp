#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

namespace agentgov {

using json = nlohmann::json;

/// Context signals, intent parameters and predicate operands are limited to
/// these three kinds so every comparison is total and decidable.
using Scalar = std::variant<bool, double, std::string>;

enum class ScalarKind { Boolean, Number, String };

using ParameterMap = std::map<std::string, Scalar>;

inline ScalarKind kind_of(const Scalar& s) noexcept { return static_cast<ScalarKind>(s.index()); }
std::string_view to_string(ScalarKind kind) noexcept;

/// Throws ParseError for objects, arrays, null and non-finite numbers.
Scalar scalar_from_json(const json& j);
/// Integral numbers below 2^53 serialize as JSON integers so the canonical
/// form of `45000` is stable whether it arrived as 45000 or 45000.0.
json to_json(const Scalar& s);

ParameterMap parameters_from_json(const json& j);
json to_json(const ParameterMap& params);

/// Human-readable rendering used in reasoning text and prompts.
std::string display(const Scalar& s);

/// Compact serialization with lexicographically sorted keys; the basis for
/// every hash and fingerprint in the library.
std::string canonical_dump(const json& j);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// `count` cryptographically random bytes rendered as lowercase hex.
std::string random_hex(std::size_t count);

}  // namespace agentgov
