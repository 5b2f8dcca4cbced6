#pragma once

#include <vector>

namespace shapesurv {

// Natural cubic spline basis on a fixed knot sequence. The first and last
// knots act as boundary knots; every basis function is a cubic polynomial
// between adjacent knots, C^2 inside the boundaries, and extends linearly
// beyond them. With K knots the basis has K-1 columns (the constant is
// excluded so the basis composes with a model intercept or standardization).
class NaturalSplineBasis {
 public:
  // Boundary knots at the min/max of the training values, interior knots at
  // the 25/50/75 percent quantiles.
  static NaturalSplineBasis fit(const std::vector<double>& training_values,
                                int num_interior_knots = 3);
  static NaturalSplineBasis from_knots(std::vector<double> knots);

  int dimension() const { return static_cast<int>(knots_.size()) - 1; }
  const std::vector<double>& knots() const { return knots_; }
  std::vector<double> eval(double x) const;

 private:
  NaturalSplineBasis() = default;

  std::vector<double> knots_;
  // per basis function: values and second derivatives at the knots, plus the
  // slopes of the linear extensions beyond each boundary
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<double>> second_derivs_;
  std::vector<double> left_slope_;
  std::vector<double> right_slope_;

  void build_interpolants();
};

}  // namespace shapesurv
