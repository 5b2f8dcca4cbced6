#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shapesurv/spline.hpp"

namespace shapesurv {

struct RawClinicalRecord {
  std::string subject_id;
  double age = 0.0;
  int gender = 0;     // binary category
  int education = 1;  // ordered level, 1-based
  double csf_abeta42 = 0.0;
  double csf_ttau = 0.0;
  double csf_ptau181 = 0.0;
  double fdg_pet = 0.0;
  double av45_pet = 0.0;
  std::optional<double> hippocampus_volume;  // fraction of intracranial volume
};

void validate(const RawClinicalRecord& r);

struct FeatureVector {
  std::vector<double> values;
  std::shared_ptr<const std::vector<std::string>> names;
};

struct TabularSchema {
  int education_levels = 4;
  bool include_volume = false;
  // empty means the default: every age spline column crossed with gender
  std::vector<std::pair<std::string, std::string>> interactions;
};

// Elementwise products of named column pairs; returned in pair order.
std::vector<double> cross_product_transform(
    const std::vector<double>& values, const std::vector<std::string>& names,
    const std::vector<std::pair<std::string, std::string>>& interactions);

// Fitted on the training split only; transform is a pure function afterwards.
// Continuous covariates and the age spline columns are standardized with
// training statistics; gender stays 0/1 and education enters through
// orthonormal polynomial contrasts.
class TabularEncoder {
 public:
  TabularEncoder() = default;

  static TabularEncoder fit(const std::vector<RawClinicalRecord>& train,
                            const TabularSchema& schema);

  FeatureVector transform(const RawClinicalRecord& r) const;

  bool fitted() const { return fitted_; }
  int width() const;
  const std::vector<std::string>& feature_names() const;
  const TabularSchema& schema() const { return schema_; }
  const NaturalSplineBasis& spline() const;

  nlohmann::json to_json() const;
  static TabularEncoder from_json(const nlohmann::json& j);

 private:
  bool fitted_ = false;
  TabularSchema schema_;
  std::vector<std::string> continuous_names_;
  std::vector<double> continuous_mean_;
  std::vector<double> continuous_scale_;
  std::optional<NaturalSplineBasis> spline_;
  std::vector<double> spline_mean_;
  std::vector<double> spline_scale_;
  std::vector<std::vector<double>> education_contrasts_;
  std::vector<std::pair<std::string, std::string>> interactions_;
  std::shared_ptr<const std::vector<std::string>> names_;  // base + interaction columns

  std::vector<double> base_values(const RawClinicalRecord& r) const;
  void require_fitted() const;
};

}  // namespace shapesurv
