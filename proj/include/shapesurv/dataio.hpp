#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shapesurv/pointnet.hpp"
#include "shapesurv/preprocess.hpp"
#include "shapesurv/survival.hpp"
#include "shapesurv/synthdata.hpp"

namespace shapesurv {

// One manifest row: survival outcome, clinical covariates, and the path of
// the subject's point-cloud file (relative paths resolve against the
// manifest's directory).
struct ManifestRow {
  std::string cloud_path;
  SurvivalRecord record;
  RawClinicalRecord raw;
};

struct CohortManifest {
  std::vector<ManifestRow> rows;
  bool has_volume = false;
  std::filesystem::path base_dir;

  std::filesystem::path resolve_cloud_path(std::size_t row) const;
};

// Strict CSV with a fixed header; every parse error names the file line.
CohortManifest load_manifest(const std::filesystem::path& path);

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows,
                   bool include_volume);

// Text format: one "x y z" triple per line, 17 significant digits.
PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);

// Uniform subsample without replacement when shrinking, sampling with
// replacement when growing; identity when K already matches.
PointCloud resample_cloud(const PointCloud& cloud, int k_target, std::uint64_t seed);

// Writes manifest + per-subject cloud files (+ a ground-truth table) for a
// synthetic cohort under out_dir.
void write_cohort(const std::vector<SyntheticSubject>& cohort,
                  const std::filesystem::path& out_dir);

std::string format_double(double v);  // shortest 17-significant-digit form

}  // namespace shapesurv
