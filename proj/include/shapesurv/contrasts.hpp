#pragma once

#include <vector>

namespace shapesurv {

// Orthonormal polynomial contrast matrix for an ordered factor with
// `num_levels` levels. Row l-1 holds the encoding of level l; the
// num_levels-1 columns are the linear, quadratic, ... trend contrasts
// (Gram-Schmidt on the Vandermonde matrix of the levels, constant dropped).
std::vector<std::vector<double>> orthogonal_polynomial_contrasts(int num_levels);

// Encoding row for one level (1-based). Throws on out-of-range levels.
std::vector<double> orthogonal_poly_coding(int level, int num_levels);

}  // namespace shapesurv
