#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "stepdad/errors.hpp"

namespace stepdad::detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                const std::string& context) {
  if (j.is_null()) return;
  if (!j.is_object()) throw ConfigError(context + ": expected a table of keys");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) {
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      throw ConfigError(context + ": unknown key '" + key + "' (allowed: " + list + ")");
    }
  }
}

template <typename T>
T read_field(const nlohmann::json& j, const char* key, T fallback, const std::string& context) {
  if (j.is_null() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(context + "." + key + ": " + e.what());
  }
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace stepdad::detail
