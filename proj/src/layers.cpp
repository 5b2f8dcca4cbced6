#include "shapesurv/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace shapesurv {

DenseLayer make_dense(int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(static_cast<std::size_t>(in) * out);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return {ad::Tensor::from(std::move(w), {in, out}, true), ad::Tensor::zeros({out}, true)};
}

DenseLayer make_dense_zero(int in, int out) {
  return {ad::Tensor::zeros({in, out}, true), ad::Tensor::zeros({out}, true)};
}

ad::Tensor dense_forward(const DenseLayer& layer, const ad::Tensor& x) {
  return ad::add_bias(ad::matmul(x, layer.weight), layer.bias);
}

MlpStack make_mlp(int in, const std::vector<int>& widths, Rng& rng) {
  if (widths.empty()) throw std::invalid_argument("mlp needs at least one layer");
  MlpStack mlp;
  int cur = in;
  for (int w : widths) {
    mlp.layers.push_back(make_dense(cur, w, rng));
    mlp.norms.emplace_back(w);
    cur = w;
  }
  return mlp;
}

ad::Tensor mlp_forward(MlpStack& mlp, const ad::Tensor& x, ad::Mode mode) {
  ad::Tensor h = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    h = dense_forward(mlp.layers[i], h);
    h = ad::batch_norm(h, mlp.norms[i], mode);
    h = ad::relu(h);
  }
  return h;
}

void collect_params(const std::string& prefix, DenseLayer& layer, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", layer.weight, true});
  out.push_back({prefix + ".bias", layer.bias, false});
}

void collect_params(const std::string& prefix, MlpStack& mlp, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    collect_params(prefix + ".layer" + std::to_string(i), mlp.layers[i], out);
    out.push_back({prefix + ".bn" + std::to_string(i) + ".gamma", mlp.norms[i].gamma, false});
    out.push_back({prefix + ".bn" + std::to_string(i) + ".beta", mlp.norms[i].beta, false});
  }
}

void collect_batchnorms(const std::string& prefix, MlpStack& mlp, std::vector<BatchNormRef>& out) {
  for (std::size_t i = 0; i < mlp.norms.size(); ++i) {
    out.push_back({prefix + ".bn" + std::to_string(i), &mlp.norms[i]});
  }
}

}  // namespace shapesurv
