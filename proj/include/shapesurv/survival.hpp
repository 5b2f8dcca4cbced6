#pragma once

#include <span>
#include <string>
#include <vector>

#include "shapesurv/tensor.hpp"

namespace shapesurv {

struct SurvivalRecord {
  std::string subject_id;
  double y = 0.0;  // observed time, months
  int delta = 0;   // 1 = event observed, 0 = right censored
};

void validate(const SurvivalRecord& r);

// Risk sets of the partial likelihood, stored in nested form: the risk set of
// an event at time t is a prefix of the subjects ordered by decreasing y.
struct RiskSetIndex {
  struct Event {
    int subject;         // index into the original record list
    double time;
    int risk_set_size;   // prefix length into order_desc
  };
  std::vector<int> order_desc;  // subject indices sorted by y descending
  std::vector<Event> events;    // ascending event time

  std::vector<int> risk_set(std::size_t event_index) const;
};

RiskSetIndex build_risk_sets(const std::vector<SurvivalRecord>& records);

// Negative Cox log partial likelihood, normalized by the number of events.
// Breslow handling of ties; the inner sums use a shifted log-sum-exp.
// Gradients flow back into `scores`.
ad::Tensor cox_loss(const ad::Tensor& scores, const std::vector<SurvivalRecord>& records);

// loss + weight_decay * sum of squared entries over the given weight
// tensors (biases and normalization parameters are the caller's to exclude).
ad::Tensor regularized_loss(const ad::Tensor& loss, std::span<const ad::Tensor> weights,
                            double weight_decay);

}  // namespace shapesurv
