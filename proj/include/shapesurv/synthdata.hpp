#pragma once

#include <cstdint>
#include <vector>

#include "shapesurv/pointnet.hpp"
#include "shapesurv/preprocess.hpp"
#include "shapesurv/survival.hpp"

namespace shapesurv {

// Synthetic cohort: deformed-ellipsoid clouds plus tabular covariates with
// known log-hazards, exponential event times, and calibrated uniform
// censoring. The seed fully determines the cohort.
struct CohortSpec {
  int n_subjects = 0;
  int points_per_cloud = 1024;
  double shape_signal_strength = 0.0;
  std::vector<double> tabular_coefficients;  // over the biomarker latents, in column order
  double baseline_hazard_rate = 0.0;
  double censoring_rate_target = 0.0;  // 0 disables censoring
  std::uint64_t rng_seed = 0;
  int education_levels = 4;
};

void validate(const CohortSpec& spec);

struct SyntheticSubject {
  PointCloud cloud;
  RawClinicalRecord raw;
  double deformation = 0.0;     // bump amplitude, in (-0.5, 0.5)
  double true_log_hazard = 0.0;
  SurvivalRecord record;
};

// K points on a fixed ellipsoid with a radial bump of Gaussian falloff at a
// fixed anchor direction; amplitude `deformation`. Centered at the origin.
PointCloud generate_cloud(int num_points, double deformation, std::uint64_t seed);

std::vector<SyntheticSubject> generate_cohort(const CohortSpec& spec);

// Plain design-matrix cohort (standard normal columns, exponential event
// times with log-hazard = coefficients . x) for solver-equivalence tests.
struct LinearCohort {
  std::vector<std::vector<double>> features;
  std::vector<SurvivalRecord> records;
  std::vector<double> true_log_hazard;
};

LinearCohort generate_linear_cohort(int n, const std::vector<double>& coefficients,
                                    double baseline_rate, double censoring_target,
                                    std::uint64_t seed);

// Horizon H such that censoring times drawn uniformly from (0, H) censor the
// given exponential rates at the target fraction in expectation.
double calibrate_censoring_horizon(const std::vector<double>& rates, double target);

}  // namespace shapesurv
