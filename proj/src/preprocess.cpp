#include "shapesurv/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "shapesurv/contrasts.hpp"

namespace shapesurv {

void validate(const RawClinicalRecord& r) {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("clinical record '" + r.subject_id + "': " + what);
  };
  if (!(r.age > 0.0)) fail("age must be > 0");
  if (r.gender != 0 && r.gender != 1) fail("gender must be 0 or 1");
  if (r.education < 1) fail("education level must be >= 1");
  for (const auto& [name, v] : {std::pair<const char*, double>{"csf_abeta42", r.csf_abeta42},
                                {"csf_ttau", r.csf_ttau},
                                {"csf_ptau181", r.csf_ptau181}}) {
    if (!(v >= 0.0)) fail(std::string(name) + " concentration must be >= 0");
  }
  if (!std::isfinite(r.fdg_pet) || !std::isfinite(r.av45_pet)) fail("PET value not finite");
  if (r.hippocampus_volume && !(*r.hippocampus_volume > 0.0 && *r.hippocampus_volume < 1.0)) {
    fail("hippocampus volume must lie in (0, 1)");
  }
}

std::vector<double> cross_product_transform(
    const std::vector<double>& values, const std::vector<std::string>& names,
    const std::vector<std::pair<std::string, std::string>>& interactions) {
  auto find = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    throw std::invalid_argument("unknown column '" + name + "' in interaction list");
  };
  std::vector<double> out;
  out.reserve(interactions.size());
  for (const auto& [a, b] : interactions) {
    out.push_back(values[find(a)] * values[find(b)]);
  }
  return out;
}

namespace {

constexpr int kSplineColumns = 4;

std::vector<std::pair<const char*, double>> continuous_fields(const RawClinicalRecord& r,
                                                              bool include_volume) {
  std::vector<std::pair<const char*, double>> fields = {
      {"csf_abeta42", r.csf_abeta42}, {"csf_ttau", r.csf_ttau},
      {"csf_ptau181", r.csf_ptau181}, {"fdg_pet", r.fdg_pet},
      {"av45_pet", r.av45_pet}};
  if (include_volume) {
    if (!r.hippocampus_volume) {
      throw std::invalid_argument("clinical record '" + r.subject_id +
                                  "': hippocampus volume required but missing");
    }
    fields.emplace_back("hippocampus_volume", *r.hippocampus_volume);
  }
  return fields;
}

void mean_and_scale(const std::vector<double>& column, const std::string& name, double* mean,
                    double* scale) {
  const auto n = static_cast<double>(column.size());
  double m = 0.0;
  for (double v : column) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : column) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 1e-12)) {
    throw std::invalid_argument("column '" + name + "' has zero variance on the training split");
  }
  *mean = m;
  *scale = sd;
}

}  // namespace

TabularEncoder TabularEncoder::fit(const std::vector<RawClinicalRecord>& train,
                                   const TabularSchema& schema) {
  if (train.size() < 2) throw std::invalid_argument("encoder fit needs at least 2 records");
  TabularEncoder e;
  e.schema_ = schema;
  for (const auto& r : train) {
    validate(r);
    if (r.education > schema.education_levels) {
      throw std::invalid_argument("clinical record '" + r.subject_id + "': education level " +
                                  std::to_string(r.education) + " exceeds schema levels " +
                                  std::to_string(schema.education_levels));
    }
  }

  for (const auto& [name, _] : continuous_fields(train.front(), schema.include_volume)) {
    e.continuous_names_.emplace_back(name);
  }
  e.continuous_mean_.resize(e.continuous_names_.size());
  e.continuous_scale_.resize(e.continuous_names_.size());
  for (std::size_t c = 0; c < e.continuous_names_.size(); ++c) {
    std::vector<double> column;
    column.reserve(train.size());
    for (const auto& r : train) column.push_back(continuous_fields(r, schema.include_volume)[c].second);
    mean_and_scale(column, e.continuous_names_[c], &e.continuous_mean_[c], &e.continuous_scale_[c]);
  }

  std::vector<double> ages;
  ages.reserve(train.size());
  for (const auto& r : train) ages.push_back(r.age);
  e.spline_ = NaturalSplineBasis::fit(ages, kSplineColumns - 1);

  e.spline_mean_.resize(kSplineColumns);
  e.spline_scale_.resize(kSplineColumns);
  for (int c = 0; c < kSplineColumns; ++c) {
    std::vector<double> column;
    column.reserve(train.size());
    for (const auto& r : train) column.push_back(e.spline_->eval(r.age)[static_cast<std::size_t>(c)]);
    mean_and_scale(column, "age_ns" + std::to_string(c + 1), &e.spline_mean_[c], &e.spline_scale_[c]);
  }

  e.education_contrasts_ = orthogonal_polynomial_contrasts(schema.education_levels);

  auto names = std::make_shared<std::vector<std::string>>();
  names->insert(names->end(), e.continuous_names_.begin(), e.continuous_names_.end());
  names->push_back("gender");
  for (int c = 0; c < kSplineColumns; ++c) names->push_back("age_ns" + std::to_string(c + 1));
  for (int c = 1; c < schema.education_levels; ++c) names->push_back("edu_poly" + std::to_string(c));

  e.interactions_ = schema.interactions;
  if (e.interactions_.empty()) {
    for (int c = 0; c < kSplineColumns; ++c) {
      e.interactions_.emplace_back("age_ns" + std::to_string(c + 1), "gender");
    }
  }
  for (const auto& [a, b] : e.interactions_) {
    for (const auto& name : {a, b}) {
      if (std::find(names->begin(), names->end(), name) == names->end()) {
        throw std::invalid_argument("unknown column '" + name + "' in interaction list");
      }
    }
  }
  for (const auto& [a, b] : e.interactions_) names->push_back(a + "×" + b);
  e.names_ = std::move(names);
  e.fitted_ = true;
  return e;
}

void TabularEncoder::require_fitted() const {
  if (!fitted_) throw std::logic_error("tabular encoder used before fit");
}

int TabularEncoder::width() const {
  require_fitted();
  return static_cast<int>(names_->size());
}

const std::vector<std::string>& TabularEncoder::feature_names() const {
  require_fitted();
  return *names_;
}

const NaturalSplineBasis& TabularEncoder::spline() const {
  require_fitted();
  return *spline_;
}

std::vector<double> TabularEncoder::base_values(const RawClinicalRecord& r) const {
  validate(r);
  if (r.education > schema_.education_levels) {
    throw std::invalid_argument("clinical record '" + r.subject_id + "': education level " +
                                std::to_string(r.education) + " exceeds schema levels " +
                                std::to_string(schema_.education_levels));
  }
  std::vector<double> v;
  const auto fields = continuous_fields(r, schema_.include_volume);
  for (std::size_t c = 0; c < fields.size(); ++c) {
    v.push_back((fields[c].second - continuous_mean_[c]) / continuous_scale_[c]);
  }
  v.push_back(static_cast<double>(r.gender));
  const auto basis = spline_->eval(r.age);
  for (int c = 0; c < kSplineColumns; ++c) {
    v.push_back((basis[static_cast<std::size_t>(c)] - spline_mean_[c]) / spline_scale_[c]);
  }
  const auto& contrast = education_contrasts_[static_cast<std::size_t>(r.education - 1)];
  v.insert(v.end(), contrast.begin(), contrast.end());
  return v;
}

FeatureVector TabularEncoder::transform(const RawClinicalRecord& r) const {
  require_fitted();
  std::vector<double> v = base_values(r);
  const std::vector<std::string> base_names(names_->begin(),
                                            names_->begin() + static_cast<long>(v.size()));
  const std::vector<double> products = cross_product_transform(v, base_names, interactions_);
  v.insert(v.end(), products.begin(), products.end());
  return {std::move(v), names_};
}

nlohmann::json TabularEncoder::to_json() const {
  require_fitted();
  nlohmann::json j;
  j["education_levels"] = schema_.education_levels;
  j["include_volume"] = schema_.include_volume;
  j["continuous_names"] = continuous_names_;
  j["continuous_mean"] = continuous_mean_;
  j["continuous_scale"] = continuous_scale_;
  j["spline_knots"] = spline_->knots();
  j["spline_mean"] = spline_mean_;
  j["spline_scale"] = spline_scale_;
  nlohmann::json inter = nlohmann::json::array();
  for (const auto& [a, b] : interactions_) inter.push_back({a, b});
  j["interactions"] = inter;
  return j;
}

TabularEncoder TabularEncoder::from_json(const nlohmann::json& j) {
  TabularEncoder e;
  e.schema_.education_levels = j.at("education_levels").get<int>();
  e.schema_.include_volume = j.at("include_volume").get<bool>();
  e.continuous_names_ = j.at("continuous_names").get<std::vector<std::string>>();
  e.continuous_mean_ = j.at("continuous_mean").get<std::vector<double>>();
  e.continuous_scale_ = j.at("continuous_scale").get<std::vector<double>>();
  e.spline_ = NaturalSplineBasis::from_knots(j.at("spline_knots").get<std::vector<double>>());
  e.spline_mean_ = j.at("spline_mean").get<std::vector<double>>();
  e.spline_scale_ = j.at("spline_scale").get<std::vector<double>>();
  for (const auto& pair : j.at("interactions")) {
    e.interactions_.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
  }
  e.education_contrasts_ = orthogonal_polynomial_contrasts(e.schema_.education_levels);

  auto names = std::make_shared<std::vector<std::string>>();
  names->insert(names->end(), e.continuous_names_.begin(), e.continuous_names_.end());
  names->push_back("gender");
  for (int c = 0; c < kSplineColumns; ++c) names->push_back("age_ns" + std::to_string(c + 1));
  for (int c = 1; c < e.schema_.education_levels; ++c) {
    names->push_back("edu_poly" + std::to_string(c));
  }
  for (const auto& [a, b] : e.interactions_) names->push_back(a + "×" + b);
  e.names_ = std::move(names);
  e.fitted_ = true;
  e.schema_.interactions = e.interactions_;
  return e;
}

}  // namespace shapesurv
