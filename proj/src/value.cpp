#include "agentgov/value.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <openssl/rand.h>
#include <openssl/sha.h>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

constexpr double kMaxExactInteger = 9007199254740992.0;  // 2^53

std::string to_hex(const unsigned char* data, std::size_t size) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(size * 2);
  for (std::size_t i = 0; i < size; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0x0f]);
  }
  return out;
}

}  // namespace

std::string_view to_string(ScalarKind kind) noexcept {
  switch (kind) {
    case ScalarKind::Boolean: return "boolean";
    case ScalarKind::Number: return "number";
    case ScalarKind::String: return "string";
  }
  return "unknown";
}

Scalar scalar_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) {
    const double d = j.get<double>();
    if (!std::isfinite(d)) throw GovernanceError(ErrorCode::ParseError, "non-finite number");
    return d;
  }
  if (j.is_string()) return j.get<std::string>();
  throw GovernanceError(ErrorCode::ParseError, "expected boolean, number or string, got " + std::string(j.type_name()));
}

json to_json(const Scalar& s) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          if (std::floor(v) == v && std::fabs(v) < kMaxExactInteger) return static_cast<std::int64_t>(v);
          return v;
        } else {
          return v;
        }
      },
      s);
}

ParameterMap parameters_from_json(const json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw GovernanceError(ErrorCode::ParseError, "parameters must be an object");
  ParameterMap out;
  for (const auto& [key, value] : j.items()) out.emplace(key, scalar_from_json(value));
  return out;
}

json to_json(const ParameterMap& params) {
  json out = json::object();
  for (const auto& [key, value] : params) out[key] = to_json(value);
  return out;
}

std::string display(const Scalar& s) {
  if (const auto* str = std::get_if<std::string>(&s)) return *str;
  return to_json(s).dump();
}

std::string canonical_dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest.data());
  return to_hex(digest.data(), digest.size());
}

std::string random_hex(std::size_t count) {
  std::vector<unsigned char> bytes(count);
  if (RAND_bytes(bytes.data(), static_cast<int>(bytes.size())) != 1) {
    throw GovernanceError(ErrorCode::StorageFailure, "system randomness unavailable");
  }
  return to_hex(bytes.data(), bytes.size());
}

}  // namespace agentgov
