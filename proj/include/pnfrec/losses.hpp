#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pnfrec/errors.hpp"
#include "pnfrec/graph.hpp"
#include "pnfrec/seqmodel.hpp"

namespace pnfrec {

// Coefficients of the composite objective
//   L = L_ce_pos + alpha * L_ce_neg + beta * L_contrastive.
// The tuner stays on the grid {0, 0.05, ..., 1}; the type itself only
// requires finite non-negative values.
struct LossWeights {
  double alpha = 0.0;
  double beta = 0.0;

  void validate() const {
    if (!(std::isfinite(alpha) && alpha >= 0.0)) {
      throw ConfigError("loss weights: alpha must be finite and >= 0");
    }
    if (!(std::isfinite(beta) && beta >= 0.0)) {
      throw ConfigError("loss weights: beta must be finite and >= 0");
    }
  }
};

// Mean full-catalog cross-entropy over next-positive prediction rows.
// A batch with no such rows has no defined value.
template <typename Real>
typename ad::Graph<Real>::Var loss_ce_positive(ad::Graph<Real>& g,
                                               const ForwardBatch<Real>& fb) {
  if (!fb.main_logits || fb.main_targets.empty()) {
    throw DataError("loss_ce_positive: no unmasked positions in batch");
  }
  return g.cross_entropy_from_logits(*fb.main_logits, fb.main_targets);
}

// Same kernel over the negative encoder's next-negative rows. Users with
// at most one negative item contribute nothing; a batch with no rows at
// all contributes zero by convention (nullopt here).
template <typename Real>
std::optional<typename ad::Graph<Real>::Var> loss_ce_negative(ad::Graph<Real>& g,
                                                              const ForwardBatch<Real>& fb) {
  if (!fb.neg_logits || fb.neg_targets.empty()) return std::nullopt;
  return g.cross_entropy_from_logits(*fb.neg_logits, fb.neg_targets);
}

// Contrastive term: for every positive position t with successor i_{t+1},
//   -log exp(f(h_t, e(i_{t+1}))) / (exp(f(h_t, e(i_{t+1}))) + sum_j exp(f(h_t, e(j))))
// with j running over the user's negative items and f the cosine
// similarity of L2-normalized vectors. Terms are averaged over the
// contributing (user, position) pairs; users with an empty negative
// sequence contribute exactly zero and do not count as contributing.
template <typename Real>
std::optional<typename ad::Graph<Real>::Var> loss_contrastive(ad::Graph<Real>& g,
                                                              const ForwardBatch<Real>& fb) {
  using Var = typename ad::Graph<Real>::Var;
  if (!fb.contr_hidden || fb.contr_spans.empty()) return std::nullopt;

  std::optional<Var> total;
  std::size_t pair_count = 0;
  for (std::size_t si = 0; si < fb.contr_spans.size(); ++si) {
    const auto [begin, end] = fb.contr_spans[si];
    const std::vector<int>& neg_items = fb.contr_neg_items[si];
    if (neg_items.empty() || begin == end) continue;

    std::vector<int> rows(end - begin);
    std::vector<int> target_rows(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      rows[i - begin] = static_cast<int>(i);
      target_rows[i - begin] = fb.contr_targets[i] + 1;  // table row of i_{t+1}
    }
    std::vector<int> neg_rows(neg_items.size());
    for (std::size_t i = 0; i < neg_items.size(); ++i) neg_rows[i] = neg_items[i] + 1;

    const Var h = g.normalize_rows(g.gather_rows(*fb.contr_hidden, rows));
    const Var pos_emb = g.normalize_rows(g.gather_rows(fb.item_table_var, target_rows));
    const Var neg_emb = g.normalize_rows(g.gather_rows(fb.item_table_var, neg_rows));

    const Var pos_sim = g.row_dot(h, pos_emb);              // (m)
    const Var neg_sim = g.matmul_nt(h, neg_emb);            // (m x |S^n|)
    // log(exp(s+) + sum_j exp(s_j)) - s+; similarities lie in [-1, 1].
    const Var denom = g.add(g.exp(pos_sim), g.row_sum(g.exp(neg_sim)));
    const Var terms = g.sub(g.log(denom), pos_sim);
    const Var span_sum = g.sum_all(terms);
    total = total ? g.add(*total, span_sum) : span_sum;
    pair_count += end - begin;
  }
  if (!total) return std::nullopt;
  return g.scale(*total, Real(1) / static_cast<Real>(pair_count));
}

template <typename Real>
struct LossParts {
  typename ad::Graph<Real>::Var total{};
  typename ad::Graph<Real>::Var ce_positive{};
  std::optional<typename ad::Graph<Real>::Var> ce_negative;
  std::optional<typename ad::Graph<Real>::Var> contrastive;

  double value_total(const ad::Graph<Real>& g) const { return g.scalar_value(total); }
  double value_ce_positive(const ad::Graph<Real>& g) const {
    return g.scalar_value(ce_positive);
  }
  double value_ce_negative(const ad::Graph<Real>& g) const {
    return ce_negative ? g.scalar_value(*ce_negative) : 0.0;
  }
  double value_contrastive(const ad::Graph<Real>& g) const {
    return contrastive ? g.scalar_value(*contrastive) : 0.0;
  }
};

// Weighted sum of the three terms. Absent terms contribute exactly zero;
// present terms are scaled even at weight zero so gradients through them
// are exactly zero rather than skipped.
template <typename Real>
LossParts<Real> loss_composite(ad::Graph<Real>& g, const ForwardBatch<Real>& fb,
                               const LossWeights& weights) {
  weights.validate();
  LossParts<Real> parts;
  parts.ce_positive = loss_ce_positive(g, fb);
  parts.ce_negative = loss_ce_negative(g, fb);
  parts.contrastive = loss_contrastive(g, fb);

  const auto check = [&g](typename ad::Graph<Real>::Var v, const char* name) {
    if (!std::isfinite(static_cast<double>(g.scalar_value(v)))) {
      throw NumericError(std::string("loss_composite: term ") + name + " is non-finite");
    }
  };
  check(parts.ce_positive, "L_ce_p");
  if (parts.ce_negative) check(*parts.ce_negative, "L_ce_n");
  if (parts.contrastive) check(*parts.contrastive, "L_c");

  typename ad::Graph<Real>::Var total = parts.ce_positive;
  if (parts.ce_negative) {
    total = g.add(total, g.scale(*parts.ce_negative, static_cast<Real>(weights.alpha)));
  }
  if (parts.contrastive) {
    total = g.add(total, g.scale(*parts.contrastive, static_cast<Real>(weights.beta)));
  }
  parts.total = total;
  return parts;
}

}  // namespace pnfrec
