#include "shapesurv/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "shapesurv/errors.hpp"
#include "shapesurv/rng.hpp"

namespace shapesurv {

namespace {

constexpr double kSemiAxisX = 1.0;
constexpr double kSemiAxisY = 0.75;
constexpr double kSemiAxisZ = 0.55;
// anchor of the bump on the unit direction sphere
constexpr double kAnchor[3] = {0.57735026918962576, 0.57735026918962576, 0.57735026918962576};
constexpr double kBumpWidth = 0.45;

}  // namespace

void validate(const CohortSpec& spec) {
  if (spec.n_subjects < 2) throw UserError("cohort needs at least 2 subjects");
  if (spec.points_per_cloud < 1) throw UserError("points_per_cloud must be >= 1");
  if (!(spec.baseline_hazard_rate > 0.0)) throw UserError("baseline hazard rate must be > 0");
  if (spec.censoring_rate_target < 0.0 || spec.censoring_rate_target >= 1.0) {
    throw UserError("censoring rate target must lie in [0, 1); got " +
                    std::to_string(spec.censoring_rate_target));
  }
  if (spec.education_levels < 2) throw UserError("education_levels must be >= 2");
  if (spec.tabular_coefficients.size() > 5) {
    throw UserError("at most 5 tabular coefficients (one per biomarker latent)");
  }
}

PointCloud generate_cloud(int num_points, double deformation, std::uint64_t seed) {
  if (num_points < 1) throw std::invalid_argument("cloud needs at least 1 point");
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(num_points));
  // antithetic direction pairs keep the undeformed centroid exactly at zero
  while (static_cast<int>(cloud.points.size()) < num_points) {
    double u[3];
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& c : u) {
        c = rng.normal();
        norm += c * c;
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (double& c : u) c /= norm;
    for (int sign : {1, -1}) {
      if (static_cast<int>(cloud.points.size()) >= num_points) break;
      const double d[3] = {sign * u[0], sign * u[1], sign * u[2]};
      double dist2 = 0.0;
      for (int k = 0; k < 3; ++k) dist2 += (d[k] - kAnchor[k]) * (d[k] - kAnchor[k]);
      const double bump = 1.0 + deformation * std::exp(-dist2 / (2.0 * kBumpWidth * kBumpWidth));
      cloud.points.push_back({kSemiAxisX * d[0] * bump, kSemiAxisY * d[1] * bump,
                              kSemiAxisZ * d[2] * bump});
    }
  }
  double centroid[3] = {0.0, 0.0, 0.0};
  for (const auto& p : cloud.points) {
    for (int k = 0; k < 3; ++k) centroid[k] += p[k];
  }
  for (double& c : centroid) c /= num_points;
  for (auto& p : cloud.points) {
    for (int k = 0; k < 3; ++k) p[k] -= centroid[k];
  }
  return cloud;
}

double calibrate_censoring_horizon(const std::vector<double>& rates, double target) {
  if (!(target > 0.0 && target < 1.0)) {
    throw UserError("censoring calibration target must lie in (0, 1)");
  }
  // P(censored | horizon H) for one exponential rate r is (1 - exp(-rH))/(rH),
  // which decreases from 1 to 0 in H; bisect the cohort average.
  auto censored_fraction = [&](double h) {
    double total = 0.0;
    for (double r : rates) {
      const double rh = r * h;
      total += rh < 1e-12 ? 1.0 : (1.0 - std::exp(-rh)) / rh;
    }
    return total / static_cast<double>(rates.size());
  };
  double lo = 1e-9, hi = 1.0;
  while (censored_fraction(hi) > target && hi < 1e18) hi *= 2.0;
  if (hi >= 1e18) throw UserError("cannot reach censoring target " + std::to_string(target));
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (censored_fraction(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<SyntheticSubject> generate_cohort(const CohortSpec& spec) {
  validate(spec);
  std::vector<SyntheticSubject> cohort(static_cast<std::size_t>(spec.n_subjects));
  std::vector<double> rates(cohort.size());

  for (std::size_t i = 0; i < cohort.size(); ++i) {
    Rng rng(Rng::derive(spec.rng_seed, i));
    SyntheticSubject& s = cohort[i];

    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%05zu", i);
    s.raw.subject_id = buf;
    s.raw.age = rng.uniform(55.0, 90.0);
    s.raw.gender = rng.uniform() < 0.5 ? 0 : 1;
    s.raw.education = rng.uniform_int(1, spec.education_levels);

    // biomarker latents are standard normal; stored concentrations/uptakes
    // are affine transforms of them
    double latents[5];
    for (double& z : latents) z = rng.normal();
    s.raw.csf_abeta42 = std::max(0.0, 150.0 + 25.0 * latents[0]);
    s.raw.csf_ttau = std::max(0.0, 90.0 + 20.0 * latents[1]);
    s.raw.csf_ptau181 = std::max(0.0, 30.0 + 8.0 * latents[2]);
    s.raw.fdg_pet = 1.2 + 0.15 * latents[3];
    s.raw.av45_pet = 1.1 + 0.2 * latents[4];
    const double vol_latent = rng.normal();
    s.raw.hippocampus_volume = std::clamp(0.0040 + 0.0006 * vol_latent, 1e-4, 0.02);

    s.deformation = rng.uniform(-0.5, 0.5);
    s.cloud = generate_cloud(spec.points_per_cloud, s.deformation,
                             Rng::derive(spec.rng_seed ^ 0x636c6f7564ull, i));

    double lh = spec.shape_signal_strength * s.deformation;
    for (std::size_t c = 0; c < spec.tabular_coefficients.size(); ++c) {
      lh += spec.tabular_coefficients[c] * latents[c];
    }
    s.true_log_hazard = lh;
    rates[i] = spec.baseline_hazard_rate * std::exp(lh);

    s.record.subject_id = s.raw.subject_id;
    s.record.delta = 1;
    s.record.y = rng.exponential(rates[i]);
  }

  if (spec.censoring_rate_target > 0.0) {
    const double horizon = calibrate_censoring_horizon(rates, spec.censoring_rate_target);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      Rng rng(Rng::derive(spec.rng_seed ^ 0x63656e736f72ull, i));
      const double censor_time = rng.uniform(0.0, horizon);
      if (censor_time < cohort[i].record.y) {
        cohort[i].record.y = censor_time;
        cohort[i].record.delta = 0;
      }
    }
  }
  for (auto& s : cohort) {
    if (s.record.y <= 0.0) s.record.y = 1e-12;  // guard against a zero draw
  }
  return cohort;
}

LinearCohort generate_linear_cohort(int n, const std::vector<double>& coefficients,
                                    double baseline_rate, double censoring_target,
                                    std::uint64_t seed) {
  if (n < 2) throw UserError("cohort needs at least 2 subjects");
  if (!(baseline_rate > 0.0)) throw UserError("baseline hazard rate must be > 0");
  if (censoring_target < 0.0 || censoring_target >= 1.0) {
    throw UserError("censoring rate target must lie in [0, 1)");
  }
  LinearCohort cohort;
  cohort.features.resize(static_cast<std::size_t>(n));
  cohort.records.resize(static_cast<std::size_t>(n));
  cohort.true_log_hazard.resize(static_cast<std::size_t>(n));
  std::vector<double> rates(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(i)));
    auto& x = cohort.features[static_cast<std::size_t>(i)];
    x.resize(coefficients.size());
    double lh = 0.0;
    for (std::size_t c = 0; c < coefficients.size(); ++c) {
      x[c] = rng.normal();
      lh += coefficients[c] * x[c];
    }
    cohort.true_log_hazard[static_cast<std::size_t>(i)] = lh;
    rates[static_cast<std::size_t>(i)] = baseline_rate * std::exp(lh);
    auto& rec = cohort.records[static_cast<std::size_t>(i)];
    rec.subject_id = "s" + std::to_string(i);
    rec.delta = 1;
    rec.y = rng.exponential(rates[static_cast<std::size_t>(i)]);
  }
  if (censoring_target > 0.0) {
    const double horizon = calibrate_censoring_horizon(rates, censoring_target);
    for (int i = 0; i < n; ++i) {
      Rng rng(Rng::derive(seed ^ 0x63656e736f72ull, static_cast<std::uint64_t>(i)));
      const double censor_time = rng.uniform(0.0, horizon);
      auto& rec = cohort.records[static_cast<std::size_t>(i)];
      if (censor_time < rec.y) {
        rec.y = censor_time;
        rec.delta = 0;
      }
    }
  }
  return cohort;
}

}  // namespace shapesurv
