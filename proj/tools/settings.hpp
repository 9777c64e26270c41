#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ww::cli {

/// Bad invocation: unknown flag, unparsable or missing setting. Exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Type { kString, kInt, kFloat, kBool };

struct SettingDef {
  std::string key;           // snake_case; flag is --key-with-dashes, env WW_KEY
  Type type = Type::kString;
  std::optional<std::string> default_value;  // nullopt: unset unless required
  std::string help;
  bool required = false;
};

std::string flag_name(const std::string& key);
std::string env_name(const std::string& key);

/// Resolved settings of one run. Values are typed JSON (null when unset).
class Settings {
 public:
  Settings(std::string command, std::map<std::string, nlohmann::json> values)
      : command_(std::move(command)), values_(std::move(values)) {}

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;

  /// Replaces a value after resolution (task-dependent defaults).
  void set(const std::string& key, nlohmann::json value) { values_[key] = std::move(value); }

  /// {"command": ..., "settings": {...}}; feeding this back through --config
  /// reproduces the run.
  nlohmann::json echo() const;

 private:
  const nlohmann::json& at(const std::string& key) const;
  std::string command_;
  std::map<std::string, nlohmann::json> values_;
};

/// Applies the precedence flag > environment > config file > default.
/// `flags` holds the raw strings of flags given on the command line.
/// Throws UsageError naming the offending source.
Settings resolve(const std::string& command, const std::vector<SettingDef>& defs,
                 const std::map<std::string, std::string>& flags,
                 const std::optional<std::string>& config_path);

/// Parses a raw string as `type`; `source` names where it came from.
nlohmann::json parse_value(const std::string& raw, Type type, const std::string& source);

}  // namespace ww::cli
