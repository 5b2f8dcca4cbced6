#include "shapesurv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace shapesurv {

EvaluationResult concordance_index(const std::vector<double>& scores,
                                   const std::vector<SurvivalRecord>& records) {
  const std::size_t n = records.size();
  if (scores.size() != n) {
    throw std::invalid_argument("concordance_index: " + std::to_string(scores.size()) +
                                " scores for " + std::to_string(n) + " records");
  }
  if (n < 2) throw std::invalid_argument("concordance_index: need at least 2 subjects");

  EvaluationResult r;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      std::size_t early = i, late = j;
      if (records[j].y < records[i].y) {
        early = j;
        late = i;
      } else if (records[i].y == records[j].y) {
        continue;  // time-tied pairs are not comparable
      }
      if (records[early].delta != 1) continue;
      ++r.num_comparable_pairs;
      if (scores[early] > scores[late]) {
        ++r.num_concordant;
      } else if (scores[early] == scores[late]) {
        ++r.num_tied_scores;
      }
    }
  }
  if (r.num_comparable_pairs == 0) throw std::invalid_argument("no comparable pairs");
  r.c_index = (static_cast<double>(r.num_concordant) + 0.5 * static_cast<double>(r.num_tied_scores)) /
              static_cast<double>(r.num_comparable_pairs);
  return r;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  if (labels.size() != n) throw std::invalid_argument("roc_auc: scores/labels length mismatch");
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("roc_auc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("roc_auc: need both classes present");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // midranks over tie groups
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_equivalence_check(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<SurvivalRecord> records(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    records[i].subject_id = "s" + std::to_string(i);
    records[i].y = labels[i] == 1 ? 1.0 : 2.0;  // positives experience the event first
    records[i].delta = 1;
  }
  const double c = concordance_index(scores, records).c_index;
  const double auc = roc_auc(scores, labels);
  if (std::abs(c - auc) > 1e-12) {
    throw std::runtime_error("c-index " + std::to_string(c) + " and rank AUC " +
                             std::to_string(auc) + " disagree");
  }
  return c;
}

}  // namespace shapesurv
