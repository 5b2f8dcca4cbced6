#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapesurv/layers.hpp"
#include "shapesurv/pointnet.hpp"
#include "shapesurv/preprocess.hpp"

namespace shapesurv {

enum class ModelVariant { Wide, Deep, WideDeep };

std::string to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string& s);

struct WideDeepConfig {
  ModelVariant variant = ModelVariant::WideDeep;
  PointNetConfig pointnet;
  std::vector<int> global_mlp = {200, 100, 100};
  int wide_width = 0;  // taken from the fitted encoder
};

// The wide pathway is a single linear map over the engineered features; the
// deep pathway is PointNet followed by the global MLP and a linear readout.
// There is no bias in the final combination: the partial-likelihood loss is
// invariant to a shared additive constant, so one would be unidentifiable.
struct WideDeepParams {
  ModelVariant variant = ModelVariant::WideDeep;
  ad::Tensor w_wide;                        // zero-initialized
  std::optional<PointNetParams> pointnet;
  std::optional<MlpStack> global_mlp;
  ad::Tensor w_deep;                        // zero-initialized

  bool has_wide() const { return variant != ModelVariant::Deep; }
  bool has_deep() const { return variant != ModelVariant::Wide; }
};

WideDeepParams make_widedeep(const WideDeepConfig& config, Rng& rng);

// Leaf tensor [B x p] from a batch of feature vectors.
ad::Tensor feature_matrix(const std::vector<const FeatureVector*>& features);

ad::Tensor wide_scores(const WideDeepParams& params, const ad::Tensor& features);
ad::Tensor deep_scores(WideDeepParams& params, const std::vector<const PointCloud*>& clouds,
                       ad::Mode mode);
// Per-subject risk scores [B] for a batch; either pathway may be absent
// depending on the variant.
ad::Tensor batch_scores(WideDeepParams& params, const ad::Tensor& features,
                        const std::vector<const PointCloud*>& clouds, ad::Mode mode);

// Single-subject convenience scores (eval-mode normalization).
double risk_score(WideDeepParams& params, const FeatureVector& x, const PointCloud& cloud);
double wide_only_score(const WideDeepParams& params, const FeatureVector& x);

std::vector<ParamRef> collect_params(WideDeepParams& params);
std::vector<BatchNormRef> collect_batchnorms(WideDeepParams& params);
std::vector<ad::Tensor> weight_tensors(WideDeepParams& params);

// Deep copies of every learnable value and batch-norm running statistic,
// used for best-epoch checkpointing during training.
struct ParamSnapshot {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> bn_means;
  std::vector<std::vector<double>> bn_vars;
};

ParamSnapshot snapshot(WideDeepParams& params);
void restore(WideDeepParams& params, const ParamSnapshot& snap);

// Versioned self-describing archive: config, every named parameter tensor,
// batch-norm running statistics, and the fitted encoder state. Round-trips
// bit-exactly.
struct Checkpoint {
  WideDeepConfig config;
  WideDeepParams params;
  TabularEncoder encoder;
};

nlohmann::json checkpoint_to_json(WideDeepParams& params, const WideDeepConfig& config,
                                  const TabularEncoder& encoder);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, WideDeepParams& params,
                     const WideDeepConfig& config, const TabularEncoder& encoder);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace shapesurv
