#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shapesurv/metrics.hpp"
#include "shapesurv/survival.hpp"
#include "shapesurv/widedeep.hpp"

namespace shapesurv {

struct LrSchedule {
  enum class Kind { Constant, StepDecay };
  Kind kind = Kind::StepDecay;
  double factor = 0.5;
  int every_n_epochs = 40;

  double at_epoch(double base_lr, int epoch) const;
};

struct TrainConfig {
  int epochs = 120;
  double learning_rate = 1e-3;
  LrSchedule schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  int batch_size = 0;  // 0 = full batch
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  int n_repeats = 10;
  std::uint64_t rng_seed = 1;
};

void validate(const TrainConfig& config);

// Per-parameter Adam accumulators. Weight decay enters through the loss
// gradient, not here.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step_count = 0;
};

AdamState make_adam_state(const std::vector<ParamRef>& params);
void adam_step(std::vector<ParamRef>& params, AdamState& state, double lr,
               const TrainConfig& config);

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

// Seed-deterministic shuffle split; reshuffles (bounded) until every part
// contains at least one event.
SplitIndices split_dataset(const std::vector<SurvivalRecord>& records, double train_fraction,
                           double val_fraction, double test_fraction, std::uint64_t seed);

// Feature vectors, clouds (empty for wide-only data), and outcomes.
struct Dataset {
  std::vector<FeatureVector> features;
  std::vector<PointCloud> clouds;
  std::vector<SurvivalRecord> records;

  int size() const { return static_cast<int>(records.size()); }
  bool has_clouds() const { return !clouds.empty(); }
  Dataset subset(const std::vector<int>& indices) const;
};

struct TrainReport {
  std::vector<double> train_loss;   // one entry per epoch
  std::vector<double> val_cindex;
  int selected_epoch = 0;           // 1-based argmax of validation c-index
  double best_val_cindex = 0.0;
  double wall_seconds = 0.0;
};

struct FitResult {
  WideDeepParams params;
  TrainReport report;
};

// Minimizes the weight-decayed partial-likelihood loss with Adam and returns
// the parameters of the best validation epoch. Test data must not be passed
// here; score it separately via predict_scores/evaluate.
FitResult fit(const WideDeepConfig& config, const Dataset& train, const Dataset& val,
              const TrainConfig& tc);

std::vector<double> predict_scores(WideDeepParams& params, const Dataset& data);
EvaluationResult evaluate(WideDeepParams& params, const Dataset& data);

struct SearchCandidate {
  std::string label;
  WideDeepConfig model;
  TrainConfig train;
};

struct SearchResult {
  struct Row {
    std::string label;
    double val_cindex = 0.0;
  };
  int best_index = -1;
  std::vector<Row> table;
};

SearchResult hyperparameter_search(const std::vector<SearchCandidate>& candidates,
                                   const Dataset& train, const Dataset& val);

}  // namespace shapesurv
