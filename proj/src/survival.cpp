#include "shapesurv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace shapesurv {

void validate(const SurvivalRecord& r) {
  if (!(r.y > 0.0)) {
    throw std::invalid_argument("survival record '" + r.subject_id + "': observed time must be > 0");
  }
  if (r.delta != 0 && r.delta != 1) {
    throw std::invalid_argument("survival record '" + r.subject_id + "': delta must be 0 or 1");
  }
}

std::vector<int> RiskSetIndex::risk_set(std::size_t event_index) const {
  const Event& e = events.at(event_index);
  return {order_desc.begin(), order_desc.begin() + e.risk_set_size};
}

RiskSetIndex build_risk_sets(const std::vector<SurvivalRecord>& records) {
  const int n = static_cast<int>(records.size());
  RiskSetIndex index;
  index.order_desc.resize(n);
  std::iota(index.order_desc.begin(), index.order_desc.end(), 0);
  std::stable_sort(index.order_desc.begin(), index.order_desc.end(),
                   [&](int a, int b) { return records[a].y > records[b].y; });
  // accumulate: everything with y >= t is a prefix of the descending order
  int prefix = 0;
  for (int pos = n - 1; pos >= 0; --pos) {
    const int subject = index.order_desc[pos];
    if (records[subject].delta == 1) {
      // extend the prefix to cover every subject with y >= this event time
      while (prefix < n && records[index.order_desc[prefix]].y >= records[subject].y) ++prefix;
      index.events.push_back({subject, records[subject].y, prefix});
    }
  }
  // positions were visited by ascending y already; ties keep stable order
  return index;
}

ad::Tensor cox_loss(const ad::Tensor& scores, const std::vector<SurvivalRecord>& records) {
  if (scores.shape().size() != 1) {
    throw std::invalid_argument("cox_loss: scores must be a vector, got " +
                                ad::shape_string(scores.shape()));
  }
  const int n = scores.size();
  if (n != static_cast<int>(records.size())) {
    throw std::invalid_argument("cox_loss: " + std::to_string(n) + " scores for " +
                                std::to_string(records.size()) + " records");
  }
  if (n < 2) throw std::invalid_argument("cox_loss: need at least 2 subjects");
  const std::vector<double>& mu = scores.data();
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(mu[i])) {
      throw std::runtime_error("cox_loss: non-finite score for subject " +
                               records[i].subject_id);
    }
  }

  RiskSetIndex index = build_risk_sets(records);
  const int num_events = static_cast<int>(index.events.size());
  if (num_events == 0) throw std::invalid_argument("no events in risk computation");

  // log sum exp over each risk-set prefix of the descending order; running
  // max with rescaling keeps the accumulation stable
  std::vector<double> log_denominator(index.events.size());
  {
    double run_max = -std::numeric_limits<double>::infinity();
    double run_sum = 0.0;
    int covered = 0;
    // events descending by time = reverse of the ascending event list
    for (int e = num_events - 1; e >= 0; --e) {
      const auto& ev = index.events[static_cast<std::size_t>(e)];
      while (covered < ev.risk_set_size) {
        const double v = mu[index.order_desc[covered]];
        if (v > run_max) {
          run_sum = run_sum * std::exp(run_max - v) + 1.0;
          run_max = v;
        } else {
          run_sum += std::exp(v - run_max);
        }
        ++covered;
      }
      log_denominator[static_cast<std::size_t>(e)] = run_max + std::log(run_sum);
    }
  }

  double total = 0.0;
  for (std::size_t e = 0; e < index.events.size(); ++e) {
    total += mu[index.events[e].subject] - log_denominator[e];
  }
  const double loss = -total / num_events;

  auto node = ad::detail::make_node("cox_loss", {1}, {loss}, {scores.ptr()});
  if (node->requires_grad) {
    ad::detail::Node* on = node.get();
    ad::detail::Node* sn = scores.node();
    auto events = index.events;
    auto order = index.order_desc;
    auto logden = log_denominator;
    node->backward_fn = [on, sn, events = std::move(events), order = std::move(order),
                         logden = std::move(logden), num_events, n] {
      if (!sn->requires_grad) return;
      sn->ensure_grad();
      const double g = on->grad[0] / num_events;
      // dL/dmu_k = (sum over events whose risk set contains k of
      //             exp(mu_k - log denominator)) - delta_k, all over #events
      std::vector<double> inclusion(static_cast<std::size_t>(n), 0.0);
      for (std::size_t e = 0; e < events.size(); ++e) {
        for (int pos = 0; pos < events[e].risk_set_size; ++pos) {
          const int k = order[static_cast<std::size_t>(pos)];
          inclusion[static_cast<std::size_t>(k)] += std::exp(sn->data[k] - logden[e]);
        }
      }
      for (std::size_t e = 0; e < events.size(); ++e) {
        inclusion[static_cast<std::size_t>(events[e].subject)] -= 1.0;
      }
      for (int k = 0; k < n; ++k) sn->grad[k] += g * inclusion[static_cast<std::size_t>(k)];
    };
  }
  return ad::Tensor(std::move(node));
}

ad::Tensor regularized_loss(const ad::Tensor& loss, std::span<const ad::Tensor> weights,
                            double weight_decay) {
  if (weight_decay < 0.0) {
    throw std::invalid_argument("weight decay must be >= 0, got " + std::to_string(weight_decay));
  }
  if (weight_decay == 0.0 || weights.empty()) return loss;
  ad::Tensor total = loss;
  for (const ad::Tensor& w : weights) {
    total = ad::add(total, ad::scale(ad::sum(ad::mul(w, w)), weight_decay));
  }
  return total;
}

}  // namespace shapesurv
