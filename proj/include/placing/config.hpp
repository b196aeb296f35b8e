#pragma once

#include <map>
#include <string>
#include <vector>

#include "placing/tactile.hpp"

namespace placing {

// Flat key=value run configuration: one assignment per line, '#' comments,
// blank lines ignored. Keys live in a fixed registry with defaults, so a
// mistyped key fails loudly instead of silently running on defaults.
class Config {
 public:
  static const std::map<std::string, std::string>& known_keys();

  static Config from_text(const std::string& text);  // throws UsageError
  static Config from_file(const std::string& path);  // also throws IoError

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& key_equals_value);  // "key=value"

  bool is_set(const std::string& key) const;
  // Effective value: the set value, or the registry default.
  std::string get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& csv);

// A registry id ("train-cylinder"), or an inline primitive:
//   cylinder:<id>:<radius>:<length>:<mass>[:<stiffness>[:<com_fraction>]]
//   cuboid:<id>:<ex>:<ey>:<ez>:<mass>[:<stiffness>[:<com_fraction>]]
ObjectPrimitive parse_object_spec(const std::string& spec);
std::vector<ObjectPrimitive> parse_object_list(const std::string& csv);

}  // namespace placing
