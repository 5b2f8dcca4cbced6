#include "shapesurv/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "shapesurv/errors.hpp"

namespace shapesurv {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double_or_throw(const std::string& text, const std::string& key,
                             const std::string& origin) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw UserError(origin + ": key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return v;
}

long parse_long_or_throw(const std::string& text, const std::string& key,
                         const std::string& origin) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw UserError(origin + ": key '" + key + "': cannot parse '" + text + "' as an integer");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !parts.empty()) parts.push_back(last);
  return parts;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str(), path.string());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UserError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw UserError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    if (!cfg.values_.emplace(key, value).second) {
      throw UserError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UserError(origin_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::require_double(const std::string& key) const {
  return parse_double_or_throw(get_string(key), key, origin_);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? require_double(key) : fallback;
}

int KeyValueConfig::require_int(const std::string& key) const {
  return static_cast<int>(parse_long_or_throw(get_string(key), key, origin_));
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  return has(key) ? require_int(key) : fallback;
}

std::uint64_t KeyValueConfig::get_seed(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string text = get_string(key);
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw UserError(origin_ + ": key '" + key + "': cannot parse '" + text + "' as a seed");
  }
  return v;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& part : split_list(get_string(key))) {
    out.push_back(parse_double_or_throw(part, key, origin_));
  }
  return out;
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key,
                                              const std::vector<int>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<int> out;
  for (const auto& part : split_list(get_string(key))) {
    out.push_back(static_cast<int>(parse_long_or_throw(part, key, origin_)));
  }
  return out;
}

void KeyValueConfig::restrict_keys(const std::vector<std::string>& allowed) const {
  for (const auto& [key, _] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw UserError(origin_ + ": unknown key '" + key + "'");
    }
  }
}

CohortSpec cohort_spec_from_config(const KeyValueConfig& cfg) {
  cfg.restrict_keys({"n_subjects", "points_per_cloud", "shape_signal_strength",
                     "tabular_coefficients", "baseline_hazard_rate", "censoring_rate_target",
                     "rng_seed", "education_levels"});
  CohortSpec spec;
  spec.n_subjects = cfg.require_int("n_subjects");
  spec.points_per_cloud = cfg.get_int("points_per_cloud", spec.points_per_cloud);
  spec.shape_signal_strength = cfg.get_double("shape_signal_strength", 0.0);
  spec.tabular_coefficients = cfg.get_double_list("tabular_coefficients", {});
  spec.baseline_hazard_rate = cfg.require_double("baseline_hazard_rate");
  spec.censoring_rate_target = cfg.get_double("censoring_rate_target", 0.0);
  spec.rng_seed = cfg.get_seed("rng_seed", 1);
  spec.education_levels = cfg.get_int("education_levels", spec.education_levels);
  validate(spec);
  return spec;
}

namespace {

LrSchedule schedule_from_string(const std::string& text, const std::string& key) {
  LrSchedule s;
  if (text == "constant") {
    s.kind = LrSchedule::Kind::Constant;
    return s;
  }
  // step(factor, every_n_epochs)
  if (text.rfind("step(", 0) == 0 && text.back() == ')') {
    const auto inner = text.substr(5, text.size() - 6);
    const auto parts = split_list(inner);
    if (parts.size() == 2) {
      s.kind = LrSchedule::Kind::StepDecay;
      s.factor = parse_double_or_throw(parts[0], key, "lr_schedule");
      s.every_n_epochs = static_cast<int>(parse_long_or_throw(parts[1], key, "lr_schedule"));
      if (s.every_n_epochs < 1) throw UserError("lr_schedule: step period must be >= 1");
      return s;
    }
  }
  throw UserError("key '" + key + "': expected 'constant' or 'step(factor, every_n_epochs)', got '" +
                  text + "'");
}

int batch_size_from_string(const std::string& text) {
  if (text == "full") return 0;
  if (text.rfind("minibatch(", 0) == 0 && text.back() == ')') {
    const auto inner = text.substr(10, text.size() - 11);
    const int size = static_cast<int>(parse_long_or_throw(trim(inner), "batch_mode", "config"));
    if (size < 2) throw UserError("batch_mode: minibatch size must be >= 2");
    return size;
  }
  throw UserError("key 'batch_mode': expected 'full' or 'minibatch(size)', got '" + text + "'");
}

}  // namespace

RunConfig run_config_from_config(const KeyValueConfig& cfg) {
  cfg.restrict_keys({"epochs", "learning_rate", "lr_schedule", "beta1", "beta2", "epsilon",
                     "weight_decay", "batch_mode", "split_fractions", "n_repeats", "rng_seed",
                     "point_mlp", "tnet_point_mlp", "tnet_fc", "global_mlp", "education_levels",
                     "resample_points"});
  RunConfig rc;
  rc.train.epochs = cfg.get_int("epochs", rc.train.epochs);
  rc.train.learning_rate = cfg.get_double("learning_rate", rc.train.learning_rate);
  if (cfg.has("lr_schedule")) {
    rc.train.schedule = schedule_from_string(cfg.get_string("lr_schedule"), "lr_schedule");
  }
  rc.train.beta1 = cfg.get_double("beta1", rc.train.beta1);
  rc.train.beta2 = cfg.get_double("beta2", rc.train.beta2);
  rc.train.epsilon = cfg.get_double("epsilon", rc.train.epsilon);
  rc.train.weight_decay = cfg.get_double("weight_decay", rc.train.weight_decay);
  if (cfg.has("batch_mode")) {
    rc.train.batch_size = batch_size_from_string(cfg.get_string("batch_mode"));
  }
  const auto fractions =
      cfg.get_double_list("split_fractions", {rc.train.train_fraction, rc.train.val_fraction,
                                              rc.train.test_fraction});
  if (fractions.size() != 3) throw UserError("split_fractions needs exactly 3 values");
  rc.train.train_fraction = fractions[0];
  rc.train.val_fraction = fractions[1];
  rc.train.test_fraction = fractions[2];
  rc.train.n_repeats = cfg.get_int("n_repeats", rc.train.n_repeats);
  rc.train.rng_seed = cfg.get_seed("rng_seed", rc.train.rng_seed);
  rc.pointnet.point_mlp = cfg.get_int_list("point_mlp", rc.pointnet.point_mlp);
  rc.pointnet.tnet_point_mlp = cfg.get_int_list("tnet_point_mlp", rc.pointnet.tnet_point_mlp);
  rc.pointnet.tnet_fc = cfg.get_int_list("tnet_fc", rc.pointnet.tnet_fc);
  rc.global_mlp = cfg.get_int_list("global_mlp", rc.global_mlp);
  rc.education_levels = cfg.get_int("education_levels", rc.education_levels);
  rc.resample_points = cfg.get_int("resample_points", rc.resample_points);
  validate(rc.train);
  return rc;
}

}  // namespace shapesurv
