#include "shapesurv/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "shapesurv/rng.hpp"

namespace shapesurv {

double LrSchedule::at_epoch(double base_lr, int epoch) const {
  if (kind == Kind::Constant) return base_lr;
  const int drops = epoch / every_n_epochs;
  return base_lr * std::pow(factor, drops);
}

void validate(const TrainConfig& config) {
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (config.weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
  const double total = config.train_fraction + config.val_fraction + config.test_fraction;
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1, got " + std::to_string(total));
  }
  if (config.batch_size < 0) throw std::invalid_argument("batch size must be >= 0");
  if (config.n_repeats < 1) throw std::invalid_argument("n_repeats must be >= 1");
}

AdamState make_adam_state(const std::vector<ParamRef>& params) {
  AdamState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const ParamRef& p : params) {
    state.m.emplace_back(p.tensor.data().size(), 0.0);
    state.v.emplace_back(p.tensor.data().size(), 0.0);
  }
  return state;
}

void adam_step(std::vector<ParamRef>& params, AdamState& state, double lr,
               const TrainConfig& config) {
  if (state.m.size() != params.size()) {
    throw std::logic_error("adam state does not match parameter list");
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(config.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(config.beta2, state.step_count);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& data = params[p].tensor.data();
    const auto& grad = params[p].tensor.grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      if (!std::isfinite(g)) {
        throw std::runtime_error("non-finite gradient in parameter '" + params[p].name +
                                 "' at index " + std::to_string(i));
      }
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      data[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

SplitIndices split_dataset(const std::vector<SurvivalRecord>& records, double train_fraction,
                           double val_fraction, double test_fraction, std::uint64_t seed) {
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  const int n = static_cast<int>(records.size());
  if (n < 3) throw std::invalid_argument("need at least 3 subjects to split");
  const int n_val = static_cast<int>(std::floor(val_fraction * n));
  const int n_test = static_cast<int>(std::floor(test_fraction * n));
  const int n_train = n - n_val - n_test;
  if (n_train < 1 || n_val < 1 || n_test < 1) {
    throw std::invalid_argument("split fractions give an empty part for n=" + std::to_string(n));
  }

  auto has_event = [&](const std::vector<int>& part) {
    for (int i : part) {
      if (records[static_cast<std::size_t>(i)].delta == 1) return true;
    }
    return false;
  };

  constexpr int kMaxAttempts = 200;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(attempt)));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    SplitIndices split;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    split.test.assign(order.begin() + n_train + n_val, order.end());
    if (has_event(split.train) && has_event(split.val) && has_event(split.test)) {
      return split;
    }
  }
  throw std::runtime_error("could not produce a split with an event in every part after " +
                           std::to_string(kMaxAttempts) + " attempts");
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  Dataset out;
  out.features.reserve(indices.size());
  out.records.reserve(indices.size());
  for (int i : indices) {
    out.features.push_back(features.at(static_cast<std::size_t>(i)));
    out.records.push_back(records.at(static_cast<std::size_t>(i)));
    if (has_clouds()) out.clouds.push_back(clouds.at(static_cast<std::size_t>(i)));
  }
  return out;
}

namespace {

std::vector<const PointCloud*> cloud_pointers(const Dataset& data, const std::vector<int>& idx) {
  std::vector<const PointCloud*> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(&data.clouds.at(static_cast<std::size_t>(i)));
  return out;
}

std::vector<const FeatureVector*> feature_pointers(const Dataset& data,
                                                   const std::vector<int>& idx) {
  std::vector<const FeatureVector*> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(&data.features.at(static_cast<std::size_t>(i)));
  return out;
}

std::vector<SurvivalRecord> record_subset(const Dataset& data, const std::vector<int>& idx) {
  std::vector<SurvivalRecord> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(data.records.at(static_cast<std::size_t>(i)));
  return out;
}

// Batches of indices; a batch without any event would make the partial
// likelihood undefined, so reshuffle a bounded number of times.
std::vector<std::vector<int>> make_batches(const Dataset& data, int batch_size,
                                           std::uint64_t seed) {
  const int n = data.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (batch_size <= 0 || batch_size >= n) return {order};

  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(attempt)));
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    bool ok = true;
    for (int start = 0; start < n; start += batch_size) {
      const int end = std::min(n, start + batch_size);
      if (end - start < 2) {
        // fold a trailing singleton into the previous batch
        batches.back().insert(batches.back().end(), order.begin() + start, order.begin() + end);
        continue;
      }
      batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    for (const auto& b : batches) {
      bool event = false;
      for (int i : b) event = event || data.records[static_cast<std::size_t>(i)].delta == 1;
      if (!event) {
        ok = false;
        break;
      }
    }
    if (ok) return batches;
  }
  throw std::runtime_error("could not build minibatches with at least one event each");
}

}  // namespace

std::vector<double> predict_scores(WideDeepParams& params, const Dataset& data) {
  if (data.size() == 0) return {};
  std::vector<int> all(static_cast<std::size_t>(data.size()));
  std::iota(all.begin(), all.end(), 0);
  ad::Tensor features;
  if (params.has_wide()) features = feature_matrix(feature_pointers(data, all));
  std::vector<const PointCloud*> clouds;
  if (params.has_deep()) clouds = cloud_pointers(data, all);
  ad::Tensor scores = batch_scores(params, features, clouds, ad::Mode::Eval);
  return scores.data();
}

EvaluationResult evaluate(WideDeepParams& params, const Dataset& data) {
  return concordance_index(predict_scores(params, data), data.records);
}

FitResult fit(const WideDeepConfig& config, const Dataset& train, const Dataset& val,
              const TrainConfig& tc) {
  validate(tc);
  if (train.size() < 2) throw std::invalid_argument("training split needs at least 2 subjects");
  if (config.variant != ModelVariant::Wide &&
      (!train.has_clouds() || !val.has_clouds())) {
    throw std::invalid_argument("deep variants need point clouds in train and validation data");
  }

  const auto t_start = std::chrono::steady_clock::now();
  Rng init_rng(Rng::derive(tc.rng_seed, 0x696e6974ull));
  FitResult result{make_widedeep(config, init_rng), {}};
  auto param_refs = collect_params(result.params);
  AdamState adam = make_adam_state(param_refs);
  const auto weights = weight_tensors(result.params);
  TrainReport& report = result.report;
  ParamSnapshot best = snapshot(result.params);
  double best_val = -1.0;
  int best_epoch = 0;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = tc.schedule.at_epoch(tc.learning_rate, epoch);
    const auto batches = make_batches(train, tc.batch_size,
                                      Rng::derive(tc.rng_seed ^ 0x6261746368ull,
                                                  static_cast<std::uint64_t>(epoch)));
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      ad::Tensor features;
      if (result.params.has_wide()) features = feature_matrix(feature_pointers(train, batch));
      std::vector<const PointCloud*> clouds;
      if (result.params.has_deep()) clouds = cloud_pointers(train, batch);
      ad::Tensor scores = batch_scores(result.params, features, clouds, ad::Mode::Train);
      ad::Tensor loss = cox_loss(scores, record_subset(train, batch));
      loss = regularized_loss(loss, weights, tc.weight_decay);
      if (!std::isfinite(loss.value())) {
        throw std::runtime_error("training loss became non-finite at epoch " +
                                 std::to_string(epoch + 1));
      }
      for (auto& p : param_refs) p.tensor.zero_grad();
      ad::backward(loss);
      adam_step(param_refs, adam, lr, tc);
      epoch_loss += loss.value() * static_cast<double>(batch.size());
    }
    report.train_loss.push_back(epoch_loss / train.size());

    const double val_c = evaluate(result.params, val).c_index;
    report.val_cindex.push_back(val_c);
    if (val_c > best_val) {
      best_val = val_c;
      best_epoch = epoch + 1;
      best = snapshot(result.params);
    }
  }

  restore(result.params, best);
  report.selected_epoch = best_epoch;
  report.best_val_cindex = best_val;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

SearchResult hyperparameter_search(const std::vector<SearchCandidate>& candidates,
                                   const Dataset& train, const Dataset& val) {
  if (candidates.empty()) throw std::invalid_argument("hyperparameter search space is empty");
  SearchResult result;
  double best = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    FitResult fitres = fit(candidates[i].model, train, val, candidates[i].train);
    result.table.push_back({candidates[i].label, fitres.report.best_val_cindex});
    if (fitres.report.best_val_cindex > best) {
      best = fitres.report.best_val_cindex;
      result.best_index = static_cast<int>(i);
    }
  }
  return result;
}

}  // namespace shapesurv
