#include "shapesurv/dataio.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "shapesurv/errors.hpp"
#include "shapesurv/rng.hpp"

namespace shapesurv {

namespace {

const std::vector<std::string> kBaseColumns = {
    "subject_id", "cloud_path", "y_months", "delta",       "age",     "gender",
    "education",  "csf_abeta42", "csf_ttau", "csf_ptau181", "fdg_pet", "av45_pet"};
const std::string kVolumeColumn = "hippocampus_volume";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

[[noreturn]] void cell_error(const std::filesystem::path& path, int line, const std::string& column,
                             const std::string& what) {
  throw UserError(path.string() + ":" + std::to_string(line) + ": column '" + column + "': " + what);
}

double parse_double(const std::string& cell, const std::filesystem::path& path, int line,
                    const std::string& column) {
  if (cell.empty()) cell_error(path, line, column, "missing value");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) {
    cell_error(path, line, column, "cannot parse '" + cell + "' as a finite number");
  }
  return v;
}

int parse_int(const std::string& cell, const std::filesystem::path& path, int line,
              const std::string& column) {
  if (cell.empty()) cell_error(path, line, column, "missing value");
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(cell.c_str(), &end, 10);
  if (end != cell.c_str() + cell.size() || errno == ERANGE) {
    cell_error(path, line, column, "cannot parse '" + cell + "' as an integer");
  }
  return static_cast<int>(v);
}

}  // namespace

std::filesystem::path CohortManifest::resolve_cloud_path(std::size_t row) const {
  std::filesystem::path p = rows.at(row).cloud_path;
  return p.is_absolute() ? p : base_dir / p;
}

CohortManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open manifest " + path.string());

  CohortManifest manifest;
  manifest.base_dir = path.has_parent_path() ? path.parent_path() : ".";

  std::string line;
  if (!std::getline(in, line)) throw UserError(path.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);

  std::vector<std::string> expected = kBaseColumns;
  if (header.size() == kBaseColumns.size() + 1 && header.back() == kVolumeColumn) {
    expected.push_back(kVolumeColumn);
    manifest.has_volume = true;
  }
  if (header != expected) {
    std::string want;
    for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
    throw UserError(path.string() + ":1: header mismatch; expected '" + want +
                    "' (optionally plus '" + kVolumeColumn + "')");
  }

  std::set<std::string> seen_ids;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != expected.size()) {
      throw UserError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(expected.size()) + " columns, found " +
                      std::to_string(cells.size()));
    }
    ManifestRow row;
    std::size_t c = 0;
    row.record.subject_id = cells[c++];
    if (row.record.subject_id.empty()) cell_error(path, line_no, "subject_id", "missing value");
    if (!seen_ids.insert(row.record.subject_id).second) {
      cell_error(path, line_no, "subject_id", "duplicate id '" + row.record.subject_id + "'");
    }
    row.raw.subject_id = row.record.subject_id;
    row.cloud_path = cells[c++];
    if (row.cloud_path.empty()) cell_error(path, line_no, "cloud_path", "missing value");
    row.record.y = parse_double(cells[c++], path, line_no, "y_months");
    if (!(row.record.y > 0.0)) cell_error(path, line_no, "y_months", "must be > 0");
    row.record.delta = parse_int(cells[c++], path, line_no, "delta");
    if (row.record.delta != 0 && row.record.delta != 1) {
      cell_error(path, line_no, "delta", "must be 0 or 1, got " + std::to_string(row.record.delta));
    }
    row.raw.age = parse_double(cells[c++], path, line_no, "age");
    row.raw.gender = parse_int(cells[c++], path, line_no, "gender");
    row.raw.education = parse_int(cells[c++], path, line_no, "education");
    row.raw.csf_abeta42 = parse_double(cells[c++], path, line_no, "csf_abeta42");
    row.raw.csf_ttau = parse_double(cells[c++], path, line_no, "csf_ttau");
    row.raw.csf_ptau181 = parse_double(cells[c++], path, line_no, "csf_ptau181");
    row.raw.fdg_pet = parse_double(cells[c++], path, line_no, "fdg_pet");
    row.raw.av45_pet = parse_double(cells[c++], path, line_no, "av45_pet");
    if (manifest.has_volume) {
      row.raw.hippocampus_volume = parse_double(cells[c++], path, line_no, kVolumeColumn);
    }
    try {
      validate(row.raw);
    } catch (const std::invalid_argument& e) {
      throw UserError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    manifest.rows.push_back(std::move(row));
  }

  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto cloud_path = manifest.resolve_cloud_path(i);
    if (!std::filesystem::exists(cloud_path)) {
      throw UserError("manifest row for '" + manifest.rows[i].record.subject_id +
                      "' references missing cloud file " + cloud_path.string());
    }
  }
  return manifest;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows,
                   bool include_volume) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write manifest " + path.string());
  for (std::size_t i = 0; i < kBaseColumns.size(); ++i) {
    out << (i ? "," : "") << kBaseColumns[i];
  }
  if (include_volume) out << "," << kVolumeColumn;
  out << "\n";
  for (const auto& row : rows) {
    out << row.record.subject_id << ',' << row.cloud_path << ',' << format_double(row.record.y)
        << ',' << row.record.delta << ',' << format_double(row.raw.age) << ',' << row.raw.gender
        << ',' << row.raw.education << ',' << format_double(row.raw.csf_abeta42) << ','
        << format_double(row.raw.csf_ttau) << ',' << format_double(row.raw.csf_ptau181) << ','
        << format_double(row.raw.fdg_pet) << ',' << format_double(row.raw.av45_pet);
    if (include_volume) {
      if (!row.raw.hippocampus_volume) {
        throw UserError("subject '" + row.record.subject_id + "' lacks the volume column");
      }
      out << ',' << format_double(*row.raw.hippocampus_volume);
    }
    out << "\n";
  }
}

PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open point-cloud file " + path.string());
  PointCloud cloud;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::array<double, 3> p{};
    std::string token;
    for (int k = 0; k < 3; ++k) {
      if (!(ss >> token)) {
        throw UserError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 3 coordinates");
      }
      errno = 0;
      char* end = nullptr;
      p[k] = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size() || errno == ERANGE || !std::isfinite(p[k])) {
        throw UserError(path.string() + ":" + std::to_string(line_no) + ": bad coordinate '" +
                        token + "'");
      }
    }
    if (ss >> token) {
      throw UserError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 3 coordinates, found more");
    }
    cloud.points.push_back(p);
  }
  if (cloud.points.empty()) throw UserError(path.string() + ": empty point cloud");
  return cloud;
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write point-cloud file " + path.string());
  for (const auto& p : cloud.points) {
    out << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2]) << "\n";
  }
}

PointCloud resample_cloud(const PointCloud& cloud, int k_target, std::uint64_t seed) {
  if (cloud.points.empty()) throw std::invalid_argument("cannot resample an empty cloud");
  if (k_target < 1) throw std::invalid_argument("resample target must be >= 1");
  const int k = cloud.size();
  if (k == k_target) return cloud;
  Rng rng(seed);
  PointCloud out;
  out.points.reserve(static_cast<std::size_t>(k_target));
  if (k > k_target) {
    // partial Fisher-Yates: the first k_target slots are a uniform
    // subsample without replacement
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k_target; ++i) {
      const int j = rng.uniform_int(i, k - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      out.points.push_back(cloud.points[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    }
  } else {
    for (int i = 0; i < k_target; ++i) {
      out.points.push_back(cloud.points[static_cast<std::size_t>(rng.uniform_int(0, k - 1))]);
    }
  }
  return out;
}

void write_cohort(const std::vector<SyntheticSubject>& cohort,
                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "clouds");
  std::vector<ManifestRow> rows;
  rows.reserve(cohort.size());
  for (const auto& s : cohort) {
    ManifestRow row;
    row.cloud_path = "clouds/" + s.record.subject_id + ".xyz";
    row.record = s.record;
    row.raw = s.raw;
    save_cloud(s.cloud, out_dir / row.cloud_path);
    rows.push_back(std::move(row));
  }
  save_manifest(out_dir / "manifest.csv", rows, true);

  std::ofstream truth(out_dir / "truth.csv");
  if (!truth) throw UserError("cannot write " + (out_dir / "truth.csv").string());
  truth << "subject_id,true_log_hazard,deformation\n";
  for (const auto& s : cohort) {
    truth << s.record.subject_id << ',' << format_double(s.true_log_hazard) << ','
          << format_double(s.deformation) << "\n";
  }
}

}  // namespace shapesurv
