#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhls/dataset.hpp"
#include "mhls/logreg.hpp"
#include "mhls/synthgaze.hpp"
#include "mhls/train.hpp"

namespace mhls {

/// Raised for unknown keys, malformed values and missing required keys.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class ValueKind { text, integer, real, flag, choice, list };

struct ConfigKey {
  std::string name;
  ValueKind kind = ValueKind::text;
  std::string default_value;
  std::string help;
  double min = -std::numeric_limits<double>::infinity();
  bool min_exclusive = false;
  double max = std::numeric_limits<double>::infinity();
  std::vector<std::string> choices;  // for choice, and for each element of list
};

const std::vector<ConfigKey>& config_schema();

/// Flat, fully validated key-value configuration.
class RunConfig {
 public:
  RunConfig();

  /// `key=value` lines; blank lines and lines starting with '#' are ignored.
  /// Later overrides win over the file.
  static RunConfig parse(std::string_view file_text, std::span<const std::string> overrides);
  static RunConfig load(const std::optional<std::filesystem::path>& file,
                        std::span<const std::string> overrides);

  void set(const std::string& key, const std::string& value);
  /// "key=value".
  void set_assignment(const std::string& assignment);

  const std::string& text(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;

  /// Throws ConfigError when an empty-by-default key was not given.
  const std::string& required(const std::string& key) const;
  bool given(const std::string& key) const { return given_.count(key) != 0; }

  void echo(std::ostream& out) const;

  SizeConfig size_for(CellKind kind) const;
  TrainConfig train_config(CellKind kind) const;
  LogRegConfig logreg_config() const;
  GeneratorKnobs generator_knobs() const;
  SplitMode split_mode() const;

 private:
  static const ConfigKey& schema_entry(const std::string& key);

  std::map<std::string, std::string> values_;
  std::map<std::string, bool> given_;
};

}  // namespace mhls
