#include "shapesurv/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "shapesurv/config.hpp"
#include "shapesurv/dataio.hpp"
#include "shapesurv/errors.hpp"
#include "shapesurv/trainer.hpp"

namespace shapesurv {

namespace {

void apply_env_seed_override(std::uint64_t* seed) {
  if (const char* env = std::getenv("SHAPESURV_SEED")) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*env == '\0' || *end != '\0' || errno == ERANGE) {
      throw UserError("SHAPESURV_SEED must be an unsigned integer, got '" + std::string(env) + "'");
    }
    *seed = v;
    std::cerr << "seed overridden by SHAPESURV_SEED=" << v << "\n";
  }
}

struct LoadedCohort {
  CohortManifest manifest;
  std::vector<PointCloud> clouds;
  std::vector<SurvivalRecord> records;
  std::vector<RawClinicalRecord> raws;
};

LoadedCohort load_cohort(const std::filesystem::path& manifest_path, bool need_clouds,
                         int resample_points, std::uint64_t seed) {
  LoadedCohort cohort;
  cohort.manifest = load_manifest(manifest_path);
  cohort.records.reserve(cohort.manifest.rows.size());
  cohort.raws.reserve(cohort.manifest.rows.size());
  for (const auto& row : cohort.manifest.rows) {
    cohort.records.push_back(row.record);
    cohort.raws.push_back(row.raw);
  }
  if (need_clouds) {
    cohort.clouds.reserve(cohort.manifest.rows.size());
    for (std::size_t i = 0; i < cohort.manifest.rows.size(); ++i) {
      PointCloud cloud = load_cloud(cohort.manifest.resolve_cloud_path(i));
      if (resample_points > 0) {
        cloud = resample_cloud(cloud, resample_points, Rng::derive(seed ^ 0x7265736d706cull, i));
      }
      cohort.clouds.push_back(std::move(cloud));
    }
  }
  return cohort;
}

// Encoder fitted on the training indices only; features computed for all.
Dataset build_dataset(const LoadedCohort& cohort, const TabularEncoder& encoder,
                      bool with_clouds) {
  Dataset data;
  data.records = cohort.records;
  data.features.reserve(cohort.raws.size());
  for (const auto& raw : cohort.raws) data.features.push_back(encoder.transform(raw));
  if (with_clouds) data.clouds = cohort.clouds;
  return data;
}

TabularEncoder fit_encoder(const LoadedCohort& cohort, const std::vector<int>& train_indices,
                           int education_levels, bool include_volume) {
  if (include_volume && !cohort.manifest.has_volume) {
    throw UserError("manifest lacks the hippocampus_volume column required by --include-volume");
  }
  std::vector<RawClinicalRecord> train_raws;
  train_raws.reserve(train_indices.size());
  for (int i : train_indices) train_raws.push_back(cohort.raws.at(static_cast<std::size_t>(i)));
  TabularSchema schema;
  schema.education_levels = education_levels;
  schema.include_volume = include_volume;
  return TabularEncoder::fit(train_raws, schema);
}

struct SingleRunResult {
  FitResult fit_result;
  WideDeepConfig model_config;
  TabularEncoder encoder;
  EvaluationResult test_eval;
  std::vector<int> test_indices;
};

SingleRunResult run_protocol(const LoadedCohort& cohort, const RunConfig& rc,
                             ModelVariant variant, bool include_volume, std::uint64_t seed) {
  SingleRunResult out;
  TrainConfig tc = rc.train;
  tc.rng_seed = seed;
  const SplitIndices split = split_dataset(cohort.records, tc.train_fraction, tc.val_fraction,
                                           tc.test_fraction, seed);
  out.encoder = fit_encoder(cohort, split.train, rc.education_levels, include_volume);
  const bool with_clouds = variant != ModelVariant::Wide;
  const Dataset all = build_dataset(cohort, out.encoder, with_clouds);

  out.model_config.variant = variant;
  out.model_config.pointnet = rc.pointnet;
  out.model_config.global_mlp = rc.global_mlp;
  out.model_config.wide_width = out.encoder.width();

  out.fit_result = fit(out.model_config, all.subset(split.train), all.subset(split.val), tc);
  out.test_eval = evaluate(out.fit_result.params, all.subset(split.test));
  out.test_indices = split.test;
  return out;
}

void write_report_csv(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write report " + path.string());
  out << "epoch,train_loss,val_cindex\n";
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    out << (e + 1) << ',' << format_double(report.train_loss[e]) << ','
        << format_double(report.val_cindex[e]) << "\n";
  }
}

nlohmann::json coefficient_table(const TabularEncoder& encoder, const ad::Tensor& w_wide) {
  nlohmann::json rows = nlohmann::json::array();
  const auto& names = encoder.feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    rows.push_back({{"feature", names[i]}, {"coefficient", w_wide.data()[i]}});
  }
  return rows;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int cmd_generate(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir) {
  CohortSpec spec = cohort_spec_from_config(KeyValueConfig::parse_file(spec_path));
  apply_env_seed_override(&spec.rng_seed);
  std::filesystem::create_directories(out_dir);
  const auto cohort = generate_cohort(spec);
  write_cohort(cohort, out_dir);
  int events = 0;
  for (const auto& s : cohort) events += s.record.delta;
  nlohmann::json summary = {{"command", "generate"},
                            {"n_subjects", spec.n_subjects},
                            {"events", events},
                            {"censored", spec.n_subjects - events},
                            {"manifest", (out_dir / "manifest.csv").string()}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_train(const std::filesystem::path& manifest_path, const std::filesystem::path& config_path,
              const std::string& variant_name, bool include_volume,
              const std::filesystem::path& checkpoint_path) {
  RunConfig rc = run_config_from_config(KeyValueConfig::parse_file(config_path));
  apply_env_seed_override(&rc.train.rng_seed);
  const ModelVariant variant = variant_from_string(variant_name);
  const LoadedCohort cohort = load_cohort(manifest_path, variant != ModelVariant::Wide,
                                          rc.resample_points, rc.train.rng_seed);
  std::cerr << "training " << variant_name << " model on " << cohort.records.size()
            << " subjects\n";
  SingleRunResult run = run_protocol(cohort, rc, variant, include_volume, rc.train.rng_seed);

  save_checkpoint(checkpoint_path, run.fit_result.params, run.model_config, run.encoder);
  const auto report_path = checkpoint_path.string() + ".report.csv";
  write_report_csv(report_path, run.fit_result.report);

  nlohmann::json summary = {{"command", "train"},
                            {"variant", variant_name},
                            {"include_volume", include_volume},
                            {"n_subjects", cohort.records.size()},
                            {"selected_epoch", run.fit_result.report.selected_epoch},
                            {"best_val_cindex", run.fit_result.report.best_val_cindex},
                            {"test_cindex", run.test_eval.c_index},
                            {"test_comparable_pairs", run.test_eval.num_comparable_pairs},
                            {"checkpoint", checkpoint_path.string()},
                            {"report_csv", report_path},
                            {"wall_seconds", run.fit_result.report.wall_seconds}};
  if (run.fit_result.params.has_wide()) {
    summary["coefficients"] = coefficient_table(run.encoder, run.fit_result.params.w_wide);
  }
  if (run.fit_result.params.variant == ModelVariant::WideDeep) {
    // wide/deep score decomposition over the test subjects
    Dataset all = build_dataset(cohort, run.encoder, true);
    Dataset test = all.subset(run.test_indices);
    std::vector<int> idx(static_cast<std::size_t>(test.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<const FeatureVector*> fps;
    std::vector<const PointCloud*> cps;
    for (int i : idx) {
      fps.push_back(&test.features[static_cast<std::size_t>(i)]);
      cps.push_back(&test.clouds[static_cast<std::size_t>(i)]);
    }
    const auto wide = wide_scores(run.fit_result.params, feature_matrix(fps)).data();
    const auto deep = deep_scores(run.fit_result.params, cps, ad::Mode::Eval).data();
    auto moments = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      return std::pair<double, double>{mean, std::sqrt(ss / static_cast<double>(v.size()))};
    };
    const auto [wm, ws] = moments(wide);
    const auto [dm, ds] = moments(deep);
    summary["decomposition"] = {{"wide_mean", wm},
                                {"wide_sd", ws},
                                {"deep_mean", dm},
                                {"deep_sd", ds}};
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_repeat(const std::filesystem::path& manifest_path, const std::filesystem::path& config_path,
               int n_repeats_override, const std::string& variants_csv, bool include_volume,
               const std::filesystem::path& out_csv) {
  RunConfig rc = run_config_from_config(KeyValueConfig::parse_file(config_path));
  apply_env_seed_override(&rc.train.rng_seed);
  if (n_repeats_override > 0) rc.train.n_repeats = n_repeats_override;

  std::vector<ModelVariant> variants;
  {
    std::string cur;
    for (char c : variants_csv + ",") {
      if (c == ',') {
        if (!cur.empty()) variants.push_back(variant_from_string(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (variants.empty()) throw UserError("no model variants requested");
  }
  const bool need_clouds = std::any_of(variants.begin(), variants.end(),
                                       [](ModelVariant v) { return v != ModelVariant::Wide; });
  const LoadedCohort cohort =
      load_cohort(manifest_path, need_clouds, rc.resample_points, rc.train.rng_seed);

  std::ofstream out(out_csv);
  if (!out) throw UserError("cannot write table " + out_csv.string());
  out << "variant,repeat,seed,test_cindex\n";
  std::map<std::string, std::vector<double>> per_variant;
  for (ModelVariant variant : variants) {
    for (int r = 0; r < rc.train.n_repeats; ++r) {
      const std::uint64_t seed = Rng::derive(rc.train.rng_seed, static_cast<std::uint64_t>(r));
      std::cerr << "repeat " << (r + 1) << "/" << rc.train.n_repeats << " variant "
                << to_string(variant) << "\n";
      SingleRunResult run = run_protocol(cohort, rc, variant, include_volume, seed);
      out << to_string(variant) << ',' << (r + 1) << ',' << seed << ','
          << format_double(run.test_eval.c_index) << "\n";
      per_variant[to_string(variant)].push_back(run.test_eval.c_index);
    }
  }
  nlohmann::json medians = nlohmann::json::object();
  for (const auto& [name, values] : per_variant) medians[name] = median(values);
  nlohmann::json summary = {{"command", "repeat"},
                            {"n_repeats", rc.train.n_repeats},
                            {"include_volume", include_volume},
                            {"table", out_csv.string()},
                            {"median_test_cindex", medians}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_predict(const std::filesystem::path& checkpoint_path,
                const std::filesystem::path& manifest_path, const std::string& out_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  const bool need_clouds = ck.params.has_deep();
  const LoadedCohort cohort = load_cohort(manifest_path, need_clouds, 0, 0);
  if (ck.encoder.schema().include_volume && !cohort.manifest.has_volume) {
    throw UserError("checkpoint expects column 'hippocampus_volume' missing from the manifest");
  }
  Dataset data;
  try {
    data = build_dataset(cohort, ck.encoder, need_clouds);
  } catch (const std::invalid_argument& e) {
    throw UserError(std::string("manifest incompatible with checkpoint schema: ") + e.what());
  }
  const std::vector<double> scores = predict_scores(ck.params, data);

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw UserError("cannot write predictions " + out_path);
    os = &file;
  }
  *os << "subject_id,risk_score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    *os << data.records[i].subject_id << ',' << format_double(scores[i]) << "\n";
  }
  return 0;
}

int cmd_coefficients(const std::filesystem::path& checkpoint_path, const std::string& out_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (!ck.params.has_wide()) {
    throw UserError("checkpoint holds a deep-only model; no wide coefficients to report");
  }
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw UserError("cannot write coefficients " + out_path);
    os = &file;
  }
  *os << "feature,coefficient\n";
  const auto& names = ck.encoder.feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    *os << names[i] << ',' << format_double(ck.params.w_wide.data()[i]) << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"survival modeling from anatomical point clouds and clinical covariates"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  auto* generate = app.add_subcommand("generate", "write a synthetic cohort");
  generate->add_option("--spec", spec_path, "cohort spec file (key = value)")->required();
  generate->add_option("--out", out_dir, "output directory")->required();

  std::string manifest_path, config_path, variant = "widedeep", checkpoint_path;
  bool include_volume = false;
  auto* train = app.add_subcommand("train", "train one model and evaluate on the test split");
  train->add_option("--manifest", manifest_path, "cohort manifest CSV")->required();
  train->add_option("--config", config_path, "training config file")->required();
  train->add_option("--variant", variant, "wide | deep | widedeep");
  train->add_flag("--include-volume", include_volume, "use the hippocampus volume column");
  train->add_option("--out-checkpoint", checkpoint_path, "checkpoint output path")->required();

  std::string repeat_manifest, repeat_config, repeat_out, variants = "wide,deep,widedeep";
  int n_repeats = 0;
  bool repeat_volume = false;
  auto* repeat = app.add_subcommand("repeat", "run the split/train/test protocol repeatedly");
  repeat->add_option("--manifest", repeat_manifest, "cohort manifest CSV")->required();
  repeat->add_option("--config", repeat_config, "training config file")->required();
  repeat->add_option("--n-repeats", n_repeats, "override the configured repeat count");
  repeat->add_option("--variants", variants, "comma list of variants to run");
  repeat->add_flag("--include-volume", repeat_volume, "use the hippocampus volume column");
  repeat->add_option("--out", repeat_out, "per-split c-index table CSV")->required();

  std::string predict_checkpoint, predict_manifest, predict_out;
  auto* predict = app.add_subcommand("predict", "score subjects with a trained checkpoint");
  predict->add_option("--checkpoint", predict_checkpoint, "model checkpoint")->required();
  predict->add_option("--manifest", predict_manifest, "cohort manifest CSV")->required();
  predict->add_option("--out", predict_out, "output CSV (stdout when omitted)");

  std::string coef_checkpoint, coef_out;
  auto* coefficients = app.add_subcommand("coefficients", "dump the wide coefficient table");
  coefficients->add_option("--checkpoint", coef_checkpoint, "model checkpoint")->required();
  coefficients->add_option("--out", coef_out, "output CSV (stdout when omitted)");

  std::vector<const char*> argv;
  argv.push_back("shapesurv");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (generate->parsed()) return cmd_generate(spec_path, out_dir);
    if (train->parsed()) {
      return cmd_train(manifest_path, config_path, variant, include_volume, checkpoint_path);
    }
    if (repeat->parsed()) {
      return cmd_repeat(repeat_manifest, repeat_config, n_repeats, variants, repeat_volume,
                        repeat_out);
    }
    if (predict->parsed()) return cmd_predict(predict_checkpoint, predict_manifest, predict_out);
    if (coefficients->parsed()) return cmd_coefficients(coef_checkpoint, coef_out);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace shapesurv
