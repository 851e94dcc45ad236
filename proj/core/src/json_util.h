// Copyright 2026 The Anchorprune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Strict accessors over nlohmann::json used by every parser in the library.

#ifndef ANCHORPRUNE_SRC_JSON_UTIL_H_
#define ANCHORPRUNE_SRC_JSON_UTIL_H_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include "anchorprune/errors.h"
#include <nlohmann/json.hpp>

namespace anchorprune::internal {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

inline Json ParseJson(std::string_view text, const std::string& locus) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw InputError(locus, std::string("malformed JSON: ") + e.what());
  }
}

inline std::string Join(const std::string& locus, std::string_view key) {
  return locus.empty() ? std::string(key) : locus + "." + std::string(key);
}

inline const Json& RequireObject(const Json& j, const std::string& locus) {
  if (!j.is_object()) throw InputError(locus, "expected a JSON object");
  return j;
}

inline void RejectUnknownKeys(const Json& j, const std::string& locus,
                              std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (std::string_view a : allowed) known = known || key == a;
    if (!known) throw InputError(locus, "unknown field \"" + key + "\"");
  }
}

inline const Json& Field(const Json& j, std::string_view key,
                         const std::string& locus) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw InputError(locus, "missing field \"" + std::string(key) + "\"");
  }
  return *it;
}

inline std::int64_t GetInt(const Json& j, std::string_view key,
                           const std::string& locus) {
  const Json& v = Field(j, key, locus);
  if (!v.is_number_integer()) {
    throw InputError(Join(locus, key), "expected an integer");
  }
  return v.get<std::int64_t>();
}

inline double GetNumber(const Json& j, std::string_view key,
                        const std::string& locus) {
  const Json& v = Field(j, key, locus);
  if (!v.is_number()) throw InputError(Join(locus, key), "expected a number");
  return v.get<double>();
}

inline std::string GetString(const Json& j, std::string_view key,
                             const std::string& locus) {
  const Json& v = Field(j, key, locus);
  if (!v.is_string()) throw InputError(Join(locus, key), "expected a string");
  return v.get<std::string>();
}

inline const Json& GetArray(const Json& j, std::string_view key,
                            const std::string& locus) {
  const Json& v = Field(j, key, locus);
  if (!v.is_array()) throw InputError(Join(locus, key), "expected an array");
  return v;
}

inline std::string Index(const std::string& locus, std::size_t i) {
  return locus + "[" + std::to_string(i) + "]";
}

}  // namespace anchorprune::internal

#endif  // ANCHORPRUNE_SRC_JSON_UTIL_H_
