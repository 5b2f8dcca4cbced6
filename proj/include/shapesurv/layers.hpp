#pragma once

#include <string>
#include <vector>

#include "shapesurv/rng.hpp"
#include "shapesurv/tensor.hpp"

namespace shapesurv {

// y = x W + b with W stored input-major [in x out]
struct DenseLayer {
  ad::Tensor weight;
  ad::Tensor bias;
  int in() const { return weight.rows(); }
  int out() const { return weight.cols(); }
};

DenseLayer make_dense(int in, int out, Rng& rng);       // fan-in scaled uniform init
DenseLayer make_dense_zero(int in, int out);            // zero weights and bias

ad::Tensor dense_forward(const DenseLayer& layer, const ad::Tensor& x);

// dense -> batch norm -> relu blocks
struct MlpStack {
  std::vector<DenseLayer> layers;
  std::vector<ad::BatchNorm> norms;
  int in() const { return layers.front().in(); }
  int out() const { return layers.back().out(); }
};

MlpStack make_mlp(int in, const std::vector<int>& widths, Rng& rng);
ad::Tensor mlp_forward(MlpStack& mlp, const ad::Tensor& x, ad::Mode mode);

// Handle onto one named parameter tensor; `is_weight` marks tensors subject
// to weight decay (dense weights and the final linear combinations, not
// biases or normalization scale/shift).
struct ParamRef {
  std::string name;
  ad::Tensor tensor;
  bool is_weight = false;
};

void collect_params(const std::string& prefix, MlpStack& mlp, std::vector<ParamRef>& out);
void collect_params(const std::string& prefix, DenseLayer& layer, std::vector<ParamRef>& out);

struct BatchNormRef {
  std::string name;
  ad::BatchNorm* state = nullptr;
};

void collect_batchnorms(const std::string& prefix, MlpStack& mlp, std::vector<BatchNormRef>& out);

}  // namespace shapesurv
