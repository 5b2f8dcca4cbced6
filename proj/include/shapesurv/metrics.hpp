#pragma once

#include <cstdint>
#include <vector>

#include "shapesurv/survival.hpp"

namespace shapesurv {

struct EvaluationResult {
  double c_index = 0.0;
  std::int64_t num_comparable_pairs = 0;
  std::int64_t num_concordant = 0;
  std::int64_t num_tied_scores = 0;
};

// Harrell's concordance index. A pair is comparable iff the earlier observed
// time belongs to an event; time-tied pairs are never comparable. Score ties
// count 1/2. Throws when no comparable pair exists.
EvaluationResult concordance_index(const std::vector<double>& scores,
                                   const std::vector<SurvivalRecord>& records);

// ROC AUC by midrank statistics (Mann-Whitney with tie correction).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Encodes binary labels as a two-time uncensored cohort, computes the
// c-index, checks it coincides with the rank-based AUC, and returns the
// common value.
double auc_equivalence_check(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace shapesurv
