#include "shapesurv/pointnet.hpp"

#include <cmath>
#include <stdexcept>

namespace shapesurv {

void validate(const PointCloud& cloud) {
  if (cloud.points.empty()) throw std::invalid_argument("point cloud is empty");
  for (const auto& p : cloud.points) {
    for (double c : p) {
      if (!std::isfinite(c)) throw std::invalid_argument("point cloud has a non-finite coordinate");
    }
  }
}

PointNetParams make_pointnet(const PointNetConfig& config, Rng& rng) {
  PointNetParams p;
  p.tnet_point = make_mlp(3, config.tnet_point_mlp, rng);
  p.tnet_fc = make_mlp(config.tnet_point_mlp.back(), config.tnet_fc, rng);
  p.tnet_out = make_dense_zero(config.tnet_fc.back(), 9);
  p.point = make_mlp(3, config.point_mlp, rng);
  return p;
}

ad::Tensor cloud_tensor(const PointCloud& cloud) {
  validate(cloud);
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(cloud.size()) * 3);
  for (const auto& p : cloud.points) data.insert(data.end(), p.begin(), p.end());
  return ad::Tensor::from(std::move(data), {cloud.size(), 3});
}

ad::Tensor tnet_pooled(PointNetParams& params, const ad::Tensor& points, ad::Mode mode) {
  return ad::set_max_pool(mlp_forward(params.tnet_point, points, mode));
}

ad::Tensor input_transform_matrix(const ad::Tensor& head_output) {
  if (head_output.size() != 9) {
    throw std::invalid_argument("transform head must produce 9 values, got " +
                                ad::shape_string(head_output.shape()));
  }
  static const std::vector<double> identity = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  return ad::add(ad::reshape(head_output, {3, 3}), ad::Tensor::from(identity, {3, 3}));
}

namespace {

ad::Tensor transform_head(PointNetParams& params, const ad::Tensor& pooled_batch, ad::Mode mode) {
  ad::Tensor h = mlp_forward(params.tnet_fc, pooled_batch, mode);
  return dense_forward(params.tnet_out, h);
}

}  // namespace

ad::Tensor input_transform(PointNetParams& params, const PointCloud& cloud, ad::Mode mode) {
  ad::Tensor pts = cloud_tensor(cloud);
  ad::Tensor pooled = tnet_pooled(params, pts, mode);
  ad::Tensor nine = transform_head(params, ad::reshape(pooled, {1, pooled.size()}), mode);
  return input_transform_matrix(ad::reshape(nine, {9}));
}

ad::Tensor encode_batch(PointNetParams& params, const std::vector<const PointCloud*>& clouds,
                        ad::Mode mode) {
  if (clouds.empty()) throw std::invalid_argument("encode_batch: empty batch");
  std::vector<ad::Tensor> point_tensors;
  std::vector<ad::Tensor> pooled;
  point_tensors.reserve(clouds.size());
  pooled.reserve(clouds.size());
  for (const PointCloud* c : clouds) {
    point_tensors.push_back(cloud_tensor(*c));
    pooled.push_back(tnet_pooled(params, point_tensors.back(), mode));
  }
  ad::Tensor heads = transform_head(params, ad::stack_rows(pooled), mode);  // [B x 9]

  std::vector<ad::Tensor> descriptors;
  descriptors.reserve(clouds.size());
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    ad::Tensor t = input_transform_matrix(ad::row(heads, static_cast<int>(i)));
    ad::Tensor transformed = ad::matmul(point_tensors[i], ad::transpose(t));
    descriptors.push_back(ad::set_max_pool(mlp_forward(params.point, transformed, mode)));
  }
  return ad::stack_rows(descriptors);
}

ad::Tensor encode(PointNetParams& params, const PointCloud& cloud, ad::Mode mode) {
  ad::Tensor batch = encode_batch(params, {&cloud}, mode);
  return ad::row(batch, 0);
}

}  // namespace shapesurv
