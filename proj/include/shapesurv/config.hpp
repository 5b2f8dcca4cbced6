#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "shapesurv/synthdata.hpp"
#include "shapesurv/trainer.hpp"

namespace shapesurv {

// "key = value" files with '#' comments. Unknown keys are rejected so typos
// fail loudly.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::filesystem::path& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  int require_int(const std::string& key) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  // raises on keys outside the allowed set
  void restrict_keys(const std::vector<std::string>& allowed) const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
};

CohortSpec cohort_spec_from_config(const KeyValueConfig& cfg);

// Training-side settings: optimizer schedule, splits, model widths, and
// dataset handling knobs shared by the train/repeat commands.
struct RunConfig {
  TrainConfig train;
  PointNetConfig pointnet;
  std::vector<int> global_mlp = {200, 100, 100};
  int education_levels = 4;
  int resample_points = 0;  // 0 keeps clouds as stored
};

RunConfig run_config_from_config(const KeyValueConfig& cfg);

}  // namespace shapesurv
