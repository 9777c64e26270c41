// Copyright 2026 The Wakeword Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "settings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>

namespace ww::cli {

using nlohmann::json;

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

std::string env_name(const std::string& key) {
  std::string out = "WW_" + key;
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

json parse_value(const std::string& raw, Type type, const std::string& source) {
  switch (type) {
    case Type::kString:
      return raw;
    case Type::kInt: {
      long long v = 0;
      const auto* end = raw.data() + raw.size();
      const auto [ptr, ec] = std::from_chars(raw.data(), end, v);
      if (raw.empty() || ec != std::errc() || ptr != end) {
        throw UsageError(source + ": expected an integer, got '" + raw + "'");
      }
      return v;
    }
    case Type::kFloat: {
      char* end = nullptr;
      const double v = std::strtod(raw.c_str(), &end);
      if (raw.empty() || end != raw.c_str() + raw.size() || !std::isfinite(v)) {
        throw UsageError(source + ": expected a number, got '" + raw + "'");
      }
      return v;
    }
    case Type::kBool: {
      std::string lower = raw;
      for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (lower == "1" || lower == "true" || lower == "yes" || lower == "on") return true;
      if (lower == "0" || lower == "false" || lower == "no" || lower == "off") return false;
      throw UsageError(source + ": expected true or false, got '" + raw + "'");
    }
  }
  return raw;
}

namespace {

json check_config_value(const json& v, Type type, const std::string& source) {
  if (v.is_null()) return v;
  switch (type) {
    case Type::kString:
      if (v.is_string()) return v;
      break;
    case Type::kInt:
      if (v.is_number_integer()) return v;
      break;
    case Type::kFloat:
      if (v.is_number()) return v.get<double>();
      break;
    case Type::kBool:
      if (v.is_boolean()) return v;
      break;
  }
  if (v.is_string()) return parse_value(v.get<std::string>(), type, source);
  throw UsageError(source + ": value " + v.dump() + " has the wrong type");
}

json load_config(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw UsageError("config file " + path + " cannot be read");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  if (doc.contains("settings")) {
    if (doc.contains("command") && doc["command"] != command) {
      throw UsageError("config file " + path + " was written for '" +
                       doc["command"].get<std::string>() + "', not '" + command + "'");
    }
    return doc["settings"];
  }
  return doc;
}

}  // namespace

Settings resolve(const std::string& command, const std::vector<SettingDef>& defs,
                 const std::map<std::string, std::string>& flags,
                 const std::optional<std::string>& config_path) {
  json config = json::object();
  if (config_path) config = load_config(*config_path, command);
  for (const auto& [key, value] : config.items()) {
    const bool known = std::any_of(defs.begin(), defs.end(),
                                   [&](const SettingDef& d) { return d.key == key; });
    if (!known) throw UsageError("config file: unknown setting '" + key + "' for " + command);
  }

  std::map<std::string, json> values;
  for (const auto& d : defs) {
    json v;
    if (const auto it = flags.find(d.key); it != flags.end()) {
      v = parse_value(it->second, d.type, flag_name(d.key));
    } else if (const char* env = std::getenv(env_name(d.key).c_str()); env != nullptr) {
      v = parse_value(env, d.type, env_name(d.key));
    } else if (config.contains(d.key)) {
      v = check_config_value(config[d.key], d.type, "config setting '" + d.key + "'");
    } else if (d.default_value) {
      v = parse_value(*d.default_value, d.type, "default of " + d.key);
    }
    if (v.is_null() && d.required) {
      throw UsageError("missing required setting " + d.key + " (" + flag_name(d.key) + " or " +
                       env_name(d.key) + ")");
    }
    values[d.key] = v;
  }
  return Settings(command, std::move(values));
}

const json& Settings::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::logic_error("setting '" + key + "' is not declared");
  return it->second;
}

bool Settings::has(const std::string& key) const { return !at(key).is_null(); }

std::string Settings::str(const std::string& key) const {
  const auto& v = at(key);
  if (v.is_null()) throw UsageError("setting " + key + " is not set (" + flag_name(key) + ")");
  return v.is_string() ? v.get<std::string>() : v.dump();
}

long long Settings::integer(const std::string& key) const {
  if (!has(key)) throw UsageError("setting " + key + " is not set (" + flag_name(key) + ")");
  return at(key).get<long long>();
}

double Settings::real(const std::string& key) const {
  if (!has(key)) throw UsageError("setting " + key + " is not set (" + flag_name(key) + ")");
  return at(key).get<double>();
}

bool Settings::flag(const std::string& key) const {
  if (!has(key)) throw UsageError("setting " + key + " is not set (" + flag_name(key) + ")");
  return at(key).get<bool>();
}

json Settings::echo() const {
  json s = json::object();
  for (const auto& [k, v] : values_) s[k] = v;
  return json{{"command", command_}, {"settings", s}};
}

}  // namespace ww::cli
