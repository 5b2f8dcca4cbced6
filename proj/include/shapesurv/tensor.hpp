#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shapesurv::ad {

enum class Mode { Train, Eval };

namespace detail {

// One record of the dynamic computation graph. Inputs always precede the
// node they feed, so a depth-first walk from the loss yields a valid
// topological order.
struct Node {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized lazily on first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void()> backward_fn;  // unset for leaves

  int size() const {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(const char* op, std::vector<int> shape, std::vector<double> data,
                  std::vector<NodePtr> inputs);

}  // namespace detail

// Value handle onto a graph node; copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

  static Tensor from(std::vector<double> data, std::vector<int> shape, bool requires_grad = false);
  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int size() const { return node_->size(); }
  int rows() const;
  int cols() const;
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }

  // Gradient accumulated by the last backward pass; zeros if none reached.
  const std::vector<double>& grad() const;
  void zero_grad() {
    node_->ensure_grad();
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  double value() const;  // single-element tensors only

  detail::Node* node() const { return node_.get(); }
  const detail::NodePtr& ptr() const { return node_; }

 private:
  detail::NodePtr node_;
};

// Learnable per-feature affine normalization with running statistics.
// Train mode normalizes by batch moments (biased variance) and updates the
// running averages; eval mode applies the stored running statistics.
struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double eps = 1e-5;

  BatchNorm() = default;
  explicit BatchNorm(int features);
  int features() const { return static_cast<int>(running_mean.size()); }
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// rows of `m` plus the vector `bias`
Tensor add_bias(const Tensor& m, const Tensor& bias);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor concat(std::span<const Tensor> parts);
Tensor stack_rows(std::span<const Tensor> rows);
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor row(const Tensor& a, int index);
// columnwise max over the set dimension of a [K x d] tensor; gradient is
// routed to the first row attaining each column maximum
Tensor set_max_pool(const Tensor& a);
Tensor batch_norm(const Tensor& x, BatchNorm& state, Mode mode);

// Populates gradients of every requires_grad ancestor of `loss`.
// Repeated calls accumulate unless grads are reset in between.
void backward(const Tensor& loss);

// Zeroes the gradients of every node reachable from `root`.
void zero_grad_graph(const Tensor& root);

std::string shape_string(const std::vector<int>& shape);

}  // namespace shapesurv::ad
