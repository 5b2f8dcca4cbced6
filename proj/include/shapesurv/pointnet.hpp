#pragma once

#include <array>
#include <vector>

#include "shapesurv/layers.hpp"

namespace shapesurv {

struct PointCloud {
  std::vector<std::array<double, 3>> points;
  int size() const { return static_cast<int>(points.size()); }
};

void validate(const PointCloud& cloud);

struct PointNetConfig {
  std::vector<int> point_mlp = {64, 128, 400};       // shared per-point layers
  std::vector<int> tnet_point_mlp = {64, 128, 400};  // transform-net trunk
  std::vector<int> tnet_fc = {200, 100};             // transform-net head (before the 9-unit output)
  int descriptor_width() const { return point_mlp.back(); }
};

// Shared point MLPs normalize over the K points of one cloud; the
// transform-net head layers normalize over the batch of clouds, so training
// always runs on batches of at least two subjects.
struct PointNetParams {
  MlpStack tnet_point;
  MlpStack tnet_fc;
  DenseLayer tnet_out;  // -> 9 values, zero-initialized so T starts at the identity
  MlpStack point;
};

PointNetParams make_pointnet(const PointNetConfig& config, Rng& rng);

ad::Tensor cloud_tensor(const PointCloud& cloud);

// Per-cloud trunk of the transform net: [K x 3] -> pooled embedding.
ad::Tensor tnet_pooled(PointNetParams& params, const ad::Tensor& points, ad::Mode mode);

// 9 head outputs for one cloud -> T = I + reshape(v, 3x3)
ad::Tensor input_transform_matrix(const ad::Tensor& head_output);

// Learned per-cloud 3x3 input transform (single-cloud path; train mode
// requires a batch, so this runs the head in the requested mode as a batch
// of one and is intended for eval/inspection).
ad::Tensor input_transform(PointNetParams& params, const PointCloud& cloud, ad::Mode mode);

// Global descriptors for a batch of clouds: [B x G]. Point trunks run
// per cloud; the transform head sees the whole batch.
ad::Tensor encode_batch(PointNetParams& params, const std::vector<const PointCloud*>& clouds,
                        ad::Mode mode);

// Single-cloud descriptor [G]; eval mode by default.
ad::Tensor encode(PointNetParams& params, const PointCloud& cloud, ad::Mode mode = ad::Mode::Eval);

}  // namespace shapesurv
