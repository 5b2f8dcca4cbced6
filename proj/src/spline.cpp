#include "shapesurv/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace shapesurv {

namespace {

double quantile(const std::vector<double>& sorted, double p) {
  const double h = p * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

double pos_cube(double x) { return x > 0.0 ? x * x * x : 0.0; }

}  // namespace

NaturalSplineBasis NaturalSplineBasis::fit(const std::vector<double>& training_values,
                                           int num_interior_knots) {
  if (training_values.size() < 2) {
    throw std::invalid_argument("spline fit needs at least 2 training values");
  }
  std::vector<double> sorted = training_values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> knots;
  knots.push_back(sorted.front());
  for (int k = 1; k <= num_interior_knots; ++k) {
    knots.push_back(quantile(sorted, static_cast<double>(k) / (num_interior_knots + 1)));
  }
  knots.push_back(sorted.back());
  return from_knots(std::move(knots));
}

NaturalSplineBasis NaturalSplineBasis::from_knots(std::vector<double> knots) {
  if (knots.size() < 2) throw std::invalid_argument("spline needs at least 2 knots");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1])) {
      throw std::invalid_argument("spline knots must be strictly increasing (knot " +
                                  std::to_string(i) + " collides); training data too degenerate");
    }
  }
  NaturalSplineBasis b;
  b.knots_ = std::move(knots);

  // Knot values of the natural truncated-power basis: the linear term plus,
  // for each interior start knot, d_k - d_{K-1} with
  // d_k(x) = ((x - k_k)_+^3 - (x - k_K)_+^3) / (k_K - k_k).
  const auto& kn = b.knots_;
  const std::size_t K = kn.size();
  b.values_.emplace_back(kn);  // linear term
  for (std::size_t k = 0; k + 2 < K; ++k) {
    std::vector<double> v(K);
    for (std::size_t j = 0; j < K; ++j) {
      const double dk = pos_cube(kn[j] - kn[k]) / (kn[K - 1] - kn[k]);
      const double dlast = pos_cube(kn[j] - kn[K - 2]) / (kn[K - 1] - kn[K - 2]);
      v[j] = dk - dlast;
    }
    b.values_.push_back(std::move(v));
  }
  b.build_interpolants();
  return b;
}

void NaturalSplineBasis::build_interpolants() {
  const std::size_t K = knots_.size();
  second_derivs_.assign(values_.size(), std::vector<double>(K, 0.0));
  left_slope_.assign(values_.size(), 0.0);
  right_slope_.assign(values_.size(), 0.0);

  std::vector<double> h(K - 1);
  for (std::size_t j = 0; j + 1 < K; ++j) h[j] = knots_[j + 1] - knots_[j];

  for (std::size_t f = 0; f < values_.size(); ++f) {
    const auto& v = values_[f];
    auto& m = second_derivs_[f];
    const std::size_t n = K - 2;  // unknown interior second derivatives
    if (n > 0) {
      // Thomas algorithm on the natural-spline tridiagonal system
      std::vector<double> diag(n), upper(n), rhs(n);
      for (std::size_t i = 0; i < n; ++i) {
        diag[i] = (h[i] + h[i + 1]) / 3.0;
        upper[i] = h[i + 1] / 6.0;
        rhs[i] = (v[i + 2] - v[i + 1]) / h[i + 1] - (v[i + 1] - v[i]) / h[i];
      }
      for (std::size_t i = 1; i < n; ++i) {
        const double w = (h[i] / 6.0) / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
      }
      m[n] = rhs[n - 1] / diag[n - 1];
      for (std::size_t i = n - 1; i >= 1; --i) {
        m[i] = (rhs[i - 1] - upper[i - 1] * m[i + 1]) / diag[i - 1];
      }
    }
    left_slope_[f] = (v[1] - v[0]) / h[0] - h[0] * m[1] / 6.0;
    right_slope_[f] = (v[K - 1] - v[K - 2]) / h[K - 2] + h[K - 2] * m[K - 2] / 6.0;
  }
}

std::vector<double> NaturalSplineBasis::eval(double x) const {
  const std::size_t K = knots_.size();
  std::vector<double> out(values_.size());
  if (x <= knots_.front()) {
    for (std::size_t f = 0; f < values_.size(); ++f) {
      out[f] = values_[f][0] + left_slope_[f] * (x - knots_.front());
    }
    return out;
  }
  if (x >= knots_.back()) {
    for (std::size_t f = 0; f < values_.size(); ++f) {
      out[f] = values_[f][K - 1] + right_slope_[f] * (x - knots_.back());
    }
    return out;
  }
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - knots_.begin()) - 1;
  const double hj = knots_[j + 1] - knots_[j];
  const double a = (knots_[j + 1] - x) / hj;
  const double b = (x - knots_[j]) / hj;
  const double wa = (a * a * a - a) * hj * hj / 6.0;
  const double wb = (b * b * b - b) * hj * hj / 6.0;
  for (std::size_t f = 0; f < values_.size(); ++f) {
    const auto& v = values_[f];
    const auto& m = second_derivs_[f];
    out[f] = a * v[j] + b * v[j + 1] + wa * m[j] + wb * m[j + 1];
  }
  return out;
}

}  // namespace shapesurv
