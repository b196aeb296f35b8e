#include "placing/config.hpp"

#include <charconv>
#include <utility>

#include "placing/error.hpp"
#include "placing/harness.hpp"
#include "placing/io_util.hpp"

namespace placing {
namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw UsageError("expected a number for " + what + ", got '" + text + "'");
  return v;
}

int parse_int(const std::string& text, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw UsageError("expected an integer for " + what + ", got '" + text +
                     "'");
  return v;
}

std::map<std::string, std::string> build_registry() {
  return {
      {"data.objects", "train-cylinder,train-cuboid"},
      {"data.arm_poses", "80"},
      {"data.inhand_per_pose", "10"},
      {"data.inhand_range", "2.792526803190927"},
      {"data.noise_std", "0.02"},

      {"train.dataset", "out/dataset.txt"},
      {"train.arch", "nn-tactile"},
      {"train.epochs", "40"},
      {"train.test_fraction", "0.2"},
      {"train.batch_size", "32"},
      {"train.lr", "0.001"},
      {"train.momentum", "0.9"},
      {"train.dropout", "0.2"},
      {"train.window", "10"},
      {"train.grad_clip", "10"},

      {"eval.methods", "oracle,pca,hough"},
      {"eval.objects", "train-cylinder,train-cuboid"},
      {"eval.arm_poses", "5"},
      {"eval.inhand_poses", "4"},
      {"eval.checkpoint_tactile", "out/nn-tactile/checkpoint.bin"},
      {"eval.checkpoint_ft", "out/nn-ft/checkpoint.bin"},
      {"eval.checkpoint_tactile_ft", "out/nn-tactile-ft/checkpoint.bin"},

      {"harness.noise_std", "0.02"},
      {"harness.release_offset_std", "0.002"},
      {"harness.descent_step", "0.001"},
      {"harness.start_clearance", "0.03"},
      {"harness.contact_ratio", "1.5"},
      {"harness.gripper_block_angle", "0.3"},
      {"harness.grasp_offset_range", "0.01"},
      {"harness.max_arm_tilt", "1.0471975511965976"},
      {"harness.inhand_range", "2.792526803190927"},

      {"classical.threshold", "0.05"},
      {"classical.n_theta", "180"},
      {"classical.n_rho", "23"},

      {"infer.dataset", "out/dataset.txt"},
      {"infer.index", "0"},
      {"infer.method", "oracle"},
      {"infer.checkpoint", ""},

      {"bench.reps", "50"},
  };
}

}  // namespace

const std::map<std::string, std::string>& Config::known_keys() {
  static const std::map<std::string, std::string> registry = build_registry();
  return registry;
}

Config Config::from_text(const std::string& text) {
  Config cfg;
  size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(
        pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) +
                       " is not key=value: '" + line + "'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config Config::from_file(const std::string& path) {
  return from_text(read_file(path));
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known_keys().count(key))
    throw UsageError("unknown config key '" + key + "'");
  values_[key] = value;
}

void Config::apply_override(const std::string& key_equals_value) {
  size_t eq = key_equals_value.find('=');
  if (eq == std::string::npos)
    throw UsageError("override must be key=value, got '" + key_equals_value +
                     "'");
  set(trim(key_equals_value.substr(0, eq)),
      trim(key_equals_value.substr(eq + 1)));
}

bool Config::is_set(const std::string& key) const {
  return values_.count(key) > 0;
}

std::string Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  auto def = known_keys().find(key);
  if (def == known_keys().end())
    throw UsageError("unknown config key '" + key + "'");
  return def->second;
}

double Config::get_double(const std::string& key) const {
  return parse_double(get(key), key);
}

int Config::get_int(const std::string& key) const {
  return parse_int(get(key), key);
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= csv.size()) {
    size_t comma = csv.find(',', pos);
    size_t end = comma == std::string::npos ? csv.size() : comma;
    std::string item = trim(csv.substr(pos, end - pos));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

ObjectPrimitive parse_object_spec(const std::string& spec) {
  if (spec.find(':') == std::string::npos) return object_by_id(spec);

  std::vector<std::string> f;
  size_t pos = 0;
  while (true) {
    size_t colon = spec.find(':', pos);
    if (colon == std::string::npos) {
      f.push_back(spec.substr(pos));
      break;
    }
    f.push_back(spec.substr(pos, colon - pos));
    pos = colon + 1;
  }

  const std::string& shape = f[0];
  if (shape == "cylinder") {
    if (f.size() < 5 || f.size() > 7)
      throw UsageError(
          "cylinder spec needs cylinder:<id>:<radius>:<length>:<mass>"
          "[:<stiffness>[:<com_fraction>]], got '" +
          spec + "'");
    double stiffness = f.size() > 5 ? parse_double(f[5], "stiffness") : 0.5;
    double com = f.size() > 6 ? parse_double(f[6], "com_fraction") : 0.5;
    return ObjectPrimitive::cylinder(f[1], parse_double(f[2], "radius"),
                                     parse_double(f[3], "length"),
                                     parse_double(f[4], "mass"), stiffness,
                                     com);
  }
  if (shape == "cuboid") {
    if (f.size() < 6 || f.size() > 8)
      throw UsageError(
          "cuboid spec needs cuboid:<id>:<ex>:<ey>:<ez>:<mass>"
          "[:<stiffness>[:<com_fraction>]], got '" +
          spec + "'");
    double stiffness = f.size() > 6 ? parse_double(f[6], "stiffness") : 0.5;
    double com = f.size() > 7 ? parse_double(f[7], "com_fraction") : 0.5;
    return ObjectPrimitive::cuboid(f[1], parse_double(f[2], "ex"),
                                   parse_double(f[3], "ey"),
                                   parse_double(f[4], "ez"),
                                   parse_double(f[5], "mass"), stiffness, com);
  }
  throw UsageError("object spec must start with cylinder: or cuboid:, got '" +
                   spec + "'");
}

std::vector<ObjectPrimitive> parse_object_list(const std::string& csv) {
  std::vector<ObjectPrimitive> out;
  for (const std::string& item : split_list(csv))
    out.push_back(parse_object_spec(item));
  return out;
}

}  // namespace placing
