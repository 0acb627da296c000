#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pnfrec/dataio.hpp"
#include "pnfrec/metrics.hpp"
#include "pnfrec/seqmodel.hpp"

namespace pnfrec {

struct EvalInput {
  std::vector<int> items;
  std::vector<std::uint8_t> polarity;
};

inline EvalInput eval_input(const EvalCase& c) {
  EvalInput in;
  in.items.reserve(c.input.size());
  in.polarity.reserve(c.input.size());
  for (const EvalInteraction& e : c.input) {
    in.items.push_back(e.item);
    in.polarity.push_back(e.positive ? 1 : 0);
  }
  return in;
}

// Ranks each held-out case with the variant-appropriate inference path.
// A user whose candidate set comes up empty (everything seen and filtered)
// gets an empty list, which scores zero.
template <typename Real>
std::vector<RankedCase> rank_cases(const ModelParams<Real>& model,
                                   std::span<const EvalCase> cases, std::size_t list_len,
                                   bool filter_seen) {
  std::vector<RankedCase> out;
  out.reserve(cases.size());
  for (const EvalCase& c : cases) {
    const EvalInput in = eval_input(c);
    RankedCase rc;
    rc.ground_truth = c.ground_truth.item;
    rc.positive = c.ground_truth.positive;
    try {
      rc.ranked = recommend(model, in.items, in.polarity, list_len, filter_seen);
    } catch (const InferenceError&) {
      // no recommendation possible for this user
    }
    out.push_back(std::move(rc));
  }
  return out;
}

// Mean NDCG@k over the positive-ground-truth cases (the early-stopping
// criterion).
template <typename Real>
double validation_ndcg_positive(const ModelParams<Real>& model,
                                std::span<const EvalCase> cases, std::size_t k,
                                bool filter_seen) {
  double sum = 0;
  std::size_t count = 0;
  for (const EvalCase& c : cases) {
    if (!c.ground_truth.positive) continue;
    const EvalInput in = eval_input(c);
    double ndcg = 0;
    try {
      const std::vector<int> ranked = recommend(model, in.items, in.polarity, k, filter_seen);
      ndcg = ndcg_at_k(ranked, c.ground_truth.item, k);
    } catch (const InferenceError&) {
    }
    sum += ndcg;
    ++count;
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace pnfrec
