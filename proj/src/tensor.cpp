#include "shapesurv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace shapesurv::ad {

namespace detail {

NodePtr make_node(const char* op, std::vector<int> shape, std::vector<double> data,
                  std::vector<NodePtr> inputs) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->inputs = std::move(inputs);
  for (const auto& in : n->inputs) {
    if (in->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  return n;
}

}  // namespace detail

using detail::Node;
using detail::NodePtr;

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

int shape_size(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_string(shape));
    n *= d;
  }
  return n;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.shape().size() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected a rank-2 tensor, got " +
                                shape_string(t.shape()));
  }
}

}  // namespace

Tensor Tensor::from(std::vector<double> data, std::vector<int> shape, bool requires_grad) {
  if (static_cast<int>(data.size()) != shape_size(shape)) {
    throw std::invalid_argument("tensor data has " + std::to_string(data.size()) +
                                " values but shape " + shape_string(shape) + " needs " +
                                std::to_string(shape_size(shape)));
  }
  auto n = detail::make_node("leaf", std::move(shape), std::move(data), {});
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  std::vector<double> data(static_cast<std::size_t>(shape_size(shape)), value);
  return from(std::move(data), std::move(shape), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({value}, {1}, requires_grad);
}

int Tensor::rows() const {
  require_rank2("rows", *this);
  return shape()[0];
}

int Tensor::cols() const {
  require_rank2("cols", *this);
  return shape()[1];
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::value() const {
  if (size() != 1) {
    throw std::invalid_argument("value(): tensor " + shape_string(shape()) + " is not a scalar");
  }
  return node_->data[0];
}

BatchNorm::BatchNorm(int features)
    : gamma(Tensor::full({features}, 1.0, true)),
      beta(Tensor::zeros({features}, true)),
      running_mean(static_cast<std::size_t>(features), 0.0),
      running_var(static_cast<std::size_t>(features), 1.0) {}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto n = detail::make_node("add", a.shape(), std::move(out), {a.ptr(), b.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    Node* bn = b.node();
    n->backward_fn = [on, an, bn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
      }
    };
  }
  return Tensor(std::move(n));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto n = detail::make_node("sub", a.shape(), std::move(out), {a.ptr(), b.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    Node* bn = b.node();
    n->backward_fn = [on, an, bn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
      }
    };
  }
  return Tensor(std::move(n));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto n = detail::make_node("mul", a.shape(), std::move(out), {a.ptr(), b.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    Node* bn = b.node();
    n->backward_fn = [on, an, bn] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i] * an->data[i];
      }
    };
  }
  return Tensor(std::move(n));
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.data()[i];
  auto n = detail::make_node("scale", a.shape(), std::move(out), {a.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    n->backward_fn = [on, an, c] {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += c * on->grad[i];
    };
  }
  return Tensor(std::move(n));
}

Tensor add_bias(const Tensor& m, const Tensor& bias) {
  require_rank2("add_bias", m);
  if (bias.shape().size() != 1 || bias.shape()[0] != m.cols()) {
    throw std::invalid_argument("add_bias: bias " + shape_string(bias.shape()) +
                                " does not match matrix " + shape_string(m.shape()));
  }
  const int r = m.rows(), c = m.cols();
  std::vector<double> out(m.data().size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[i * c + j] = m.data()[i * c + j] + bias.data()[j];
  auto n = detail::make_node("add_bias", m.shape(), std::move(out), {m.ptr(), bias.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* mn = m.node();
    Node* bn = bias.node();
    n->backward_fn = [on, mn, bn, r, c] {
      if (mn->requires_grad) {
        mn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) mn->grad[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) bn->grad[j] += on->grad[i * c + j];
      }
    };
  }
  return Tensor(std::move(n));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
  const int m = a.rows(), k = a.cols(), p = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * p, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      const double av = ad[i * k + l];
      const double* brow = bd + static_cast<std::size_t>(l) * p;
      double* orow = out.data() + static_cast<std::size_t>(i) * p;
      for (int j = 0; j < p; ++j) orow[j] += av * brow[j];
    }
  }
  auto n = detail::make_node("matmul", {m, p}, std::move(out), {a.ptr(), b.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    Node* bn = b.node();
    n->backward_fn = [on, an, bn, m, k, p] {
      const double* g = on->grad.data();
      if (an->requires_grad) {
        an->ensure_grad();
        // dA = G * B^T
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < p; ++j) {
            const double gv = g[i * p + j];
            if (gv == 0.0) continue;
            for (int l = 0; l < k; ++l) an->grad[i * k + l] += gv * bn->data[l * p + j];
          }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        // dB = A^T * G
        for (int l = 0; l < k; ++l)
          for (int i = 0; i < m; ++i) {
            const double av = an->data[i * k + l];
            if (av == 0.0) continue;
            for (int j = 0; j < p; ++j) bn->grad[l * p + j] += av * g[i * p + j];
          }
      }
    };
  }
  return Tensor(std::move(n));
}

Tensor transpose(const Tensor& a) {
  require_rank2("transpose", a);
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(a.data().size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
  auto n = detail::make_node("transpose", {c, r}, std::move(out), {a.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    n->backward_fn = [on, an, r, c] {
      an->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) an->grad[i * c + j] += on->grad[j * r + i];
    };
  }
  return Tensor(std::move(n));
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  auto n = detail::make_node("relu", a.shape(), std::move(out), {a.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    n->backward_fn = [on, an] {
      an->ensure_grad();
      // subgradient 0 at the kink
      for (std::size_t i = 0; i < on->grad.size(); ++i)
        if (an->data[i] > 0.0) an->grad[i] += on->grad[i];
    };
  }
  return Tensor(std::move(n));
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(a.data()[i]);
    if (!std::isfinite(out[i])) {
      throw std::runtime_error("exp: overflow at input " + std::to_string(a.data()[i]));
    }
  }
  auto n = detail::make_node("exp", a.shape(), std::move(out), {a.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    n->backward_fn = [on, an] {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * on->data[i];
    };
  }
  return Tensor(std::move(n));
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(a.data()[i] > 0.0)) {
      throw std::runtime_error("log: non-positive input " + std::to_string(a.data()[i]));
    }
    out[i] = std::log(a.data()[i]);
  }
  auto n = detail::make_node("log", a.shape(), std::move(out), {a.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    n->backward_fn = [on, an] {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] / an->data[i];
    };
  }
  return Tensor(std::move(n));
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  auto n = detail::make_node("sum", {1}, {total}, {a.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    n->backward_fn = [on, an] {
      an->ensure_grad();
      const double g = on->grad[0];
      for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
    };
  }
  return Tensor(std::move(n));
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::vector<double> out;
  std::vector<NodePtr> inputs;
  std::vector<int> offsets;
  for (const Tensor& p : parts) {
    if (p.shape().size() != 1) {
      throw std::invalid_argument("concat: expected rank-1 tensors, got " +
                                  shape_string(p.shape()));
    }
    offsets.push_back(static_cast<int>(out.size()));
    out.insert(out.end(), p.data().begin(), p.data().end());
    inputs.push_back(p.ptr());
  }
  const int total = static_cast<int>(out.size());
  auto n = detail::make_node("concat", {total}, std::move(out), std::move(inputs));
  if (n->requires_grad) {
    Node* on = n.get();
    n->backward_fn = [on, offsets] {
      for (std::size_t k = 0; k < on->inputs.size(); ++k) {
        Node* in = on->inputs[k].get();
        if (!in->requires_grad) continue;
        in->ensure_grad();
        const int off = offsets[k];
        for (std::size_t i = 0; i < in->data.size(); ++i) in->grad[i] += on->grad[off + i];
      }
    };
  }
  return Tensor(std::move(n));
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  const int d = rows.front().size();
  std::vector<double> out;
  std::vector<NodePtr> inputs;
  for (const Tensor& r : rows) {
    if (r.shape().size() != 1 || r.size() != d) {
      throw std::invalid_argument("stack_rows: all rows must be rank-1 of equal length");
    }
    out.insert(out.end(), r.data().begin(), r.data().end());
    inputs.push_back(r.ptr());
  }
  const int b = static_cast<int>(rows.size());
  auto n = detail::make_node("stack_rows", {b, d}, std::move(out), std::move(inputs));
  if (n->requires_grad) {
    Node* on = n.get();
    n->backward_fn = [on, d] {
      for (std::size_t k = 0; k < on->inputs.size(); ++k) {
        Node* in = on->inputs[k].get();
        if (!in->requires_grad) continue;
        in->ensure_grad();
        for (int i = 0; i < d; ++i) in->grad[i] += on->grad[k * d + i];
      }
    };
  }
  return Tensor(std::move(n));
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_size(shape) != a.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_string(a.shape()) + " as " +
                                shape_string(shape));
  }
  auto n = detail::make_node("reshape", std::move(shape), a.data(), {a.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    n->backward_fn = [on, an] {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
    };
  }
  return Tensor(std::move(n));
}

Tensor row(const Tensor& a, int index) {
  require_rank2("row", a);
  const int r = a.rows(), c = a.cols();
  if (index < 0 || index >= r) {
    throw std::invalid_argument("row: index " + std::to_string(index) + " out of range for " +
                                shape_string(a.shape()));
  }
  std::vector<double> out(a.data().begin() + static_cast<std::size_t>(index) * c,
                          a.data().begin() + static_cast<std::size_t>(index + 1) * c);
  auto n = detail::make_node("row", {c}, std::move(out), {a.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    n->backward_fn = [on, an, index, c] {
      an->ensure_grad();
      for (int j = 0; j < c; ++j) an->grad[index * c + j] += on->grad[j];
    };
  }
  return Tensor(std::move(n));
}

Tensor set_max_pool(const Tensor& a) {
  require_rank2("set_max_pool", a);
  const int k = a.rows(), d = a.cols();
  if (k < 1) throw std::invalid_argument("set_max_pool: empty set");
  std::vector<double> out(static_cast<std::size_t>(d));
  std::vector<int> argmax(static_cast<std::size_t>(d), 0);
  for (int j = 0; j < d; ++j) {
    double best = a.data()[j];
    int best_i = 0;
    for (int i = 1; i < k; ++i) {
      const double v = a.data()[i * d + j];
      if (v > best) {
        best = v;
        best_i = i;
      }
    }
    out[j] = best;
    argmax[j] = best_i;
  }
  auto n = detail::make_node("set_max_pool", {d}, std::move(out), {a.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* an = a.node();
    n->backward_fn = [on, an, argmax, d] {
      an->ensure_grad();
      for (int j = 0; j < d; ++j) an->grad[argmax[j] * d + j] += on->grad[j];
    };
  }
  return Tensor(std::move(n));
}

Tensor batch_norm(const Tensor& x, BatchNorm& state, Mode mode) {
  require_rank2("batch_norm", x);
  const int b = x.rows(), f = x.cols();
  if (f != state.features()) {
    throw std::invalid_argument("batch_norm: input has " + std::to_string(f) +
                                " features, state expects " + std::to_string(state.features()));
  }
  const double eps = state.eps;
  std::vector<double> mean(static_cast<std::size_t>(f));
  std::vector<double> var(static_cast<std::size_t>(f));
  if (mode == Mode::Train) {
    if (b < 2) {
      throw std::invalid_argument(
          "batch_norm: train mode needs a batch of at least 2, got " + std::to_string(b) +
          " (variance degenerate)");
    }
    for (int j = 0; j < f; ++j) {
      double m = 0.0;
      for (int i = 0; i < b; ++i) m += x.data()[i * f + j];
      m /= b;
      double v = 0.0;
      for (int i = 0; i < b; ++i) {
        const double dxi = x.data()[i * f + j] - m;
        v += dxi * dxi;
      }
      v /= b;
      mean[j] = m;
      var[j] = v;
    }
    for (int j = 0; j < f; ++j) {
      state.running_mean[j] = state.momentum * state.running_mean[j] + (1.0 - state.momentum) * mean[j];
      state.running_var[j] = state.momentum * state.running_var[j] + (1.0 - state.momentum) * var[j];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  std::vector<double> inv_std(static_cast<std::size_t>(f));
  for (int j = 0; j < f; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);

  std::vector<double> xhat(x.data().size());
  std::vector<double> out(x.data().size());
  const std::vector<double>& g = state.gamma.data();
  const std::vector<double>& be = state.beta.data();
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < f; ++j) {
      const double h = (x.data()[i * f + j] - mean[j]) * inv_std[j];
      xhat[i * f + j] = h;
      out[i * f + j] = g[j] * h + be[j];
    }

  auto n = detail::make_node("batch_norm", x.shape(), std::move(out),
                             {x.ptr(), state.gamma.ptr(), state.beta.ptr()});
  if (n->requires_grad) {
    Node* on = n.get();
    Node* xn = x.node();
    Node* gn = state.gamma.node();
    Node* bn = state.beta.node();
    const bool train = mode == Mode::Train;
    n->backward_fn = [on, xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), b, f,
                      train] {
      const double* og = on->grad.data();
      if (gn->requires_grad) {
        gn->ensure_grad();
        for (int i = 0; i < b; ++i)
          for (int j = 0; j < f; ++j) gn->grad[j] += og[i * f + j] * xhat[i * f + j];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int i = 0; i < b; ++i)
          for (int j = 0; j < f; ++j) bn->grad[j] += og[i * f + j];
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        if (!train) {
          for (int i = 0; i < b; ++i)
            for (int j = 0; j < f; ++j)
              xn->grad[i * f + j] += og[i * f + j] * gn->data[j] * inv_std[j];
        } else {
          // dL/dx through the batch statistics
          for (int j = 0; j < f; ++j) {
            double sum_gh = 0.0;  // sum of dL/dxhat
            double sum_gh_xhat = 0.0;
            for (int i = 0; i < b; ++i) {
              const double gh = og[i * f + j] * gn->data[j];
              sum_gh += gh;
              sum_gh_xhat += gh * xhat[i * f + j];
            }
            for (int i = 0; i < b; ++i) {
              const double gh = og[i * f + j] * gn->data[j];
              xn->grad[i * f + j] +=
                  inv_std[j] * (gh - sum_gh / b - xhat[i * f + j] * sum_gh_xhat / b);
            }
          }
        }
      }
    };
  }
  return Tensor(std::move(n));
}

namespace {

std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // iterative DFS; children are emitted before their consumers
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got " +
                                shape_string(loss.shape()));
  }
  auto order = topo_order(loss.node());
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->requires_grad) {
      n->ensure_grad();
      n->backward_fn();
    }
  }
}

void zero_grad_graph(const Tensor& root) {
  for (Node* n : topo_order(root.node())) {
    std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
}

}  // namespace shapesurv::ad
