#include "shapesurv/contrasts.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace shapesurv {

std::vector<std::vector<double>> orthogonal_polynomial_contrasts(int num_levels) {
  if (num_levels < 2) throw std::invalid_argument("contrasts need at least 2 levels");
  const int L = num_levels;
  // Vandermonde columns 1, l, l^2, ... over levels 1..L
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(L), std::vector<double>(L));
  for (int p = 0; p < L; ++p) {
    for (int l = 0; l < L; ++l) cols[p][l] = std::pow(static_cast<double>(l + 1), p);
  }
  // modified Gram-Schmidt, one reorthogonalization pass for higher degrees
  for (int p = 0; p < L; ++p) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int q = 0; q < p; ++q) {
        double dot = 0.0;
        for (int l = 0; l < L; ++l) dot += cols[p][l] * cols[q][l];
        for (int l = 0; l < L; ++l) cols[p][l] -= dot * cols[q][l];
      }
    }
    double norm = 0.0;
    for (int l = 0; l < L; ++l) norm += cols[p][l] * cols[p][l];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw std::runtime_error("degenerate level grid in polynomial contrasts");
    for (int l = 0; l < L; ++l) cols[p][l] /= norm;
  }
  // rows = levels, columns = degree 1..L-1 (constant dropped)
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(L),
                                        std::vector<double>(L - 1));
  for (int l = 0; l < L; ++l)
    for (int p = 1; p < L; ++p) rows[l][p - 1] = cols[p][l];
  return rows;
}

std::vector<double> orthogonal_poly_coding(int level, int num_levels) {
  if (level < 1 || level > num_levels) {
    throw std::invalid_argument("level " + std::to_string(level) + " out of range 1.." +
                                std::to_string(num_levels));
  }
  return orthogonal_polynomial_contrasts(num_levels)[static_cast<std::size_t>(level - 1)];
}

}  // namespace shapesurv
