#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pnfrec/adam.hpp"
#include "pnfrec/dataio.hpp"
#include "pnfrec/errors.hpp"
#include "pnfrec/evaluate.hpp"
#include "pnfrec/losses.hpp"
#include "pnfrec/seqmodel.hpp"

namespace pnfrec {

struct TrainConfig {
  ModelVariant variant = ModelVariant::pnfrec;
  EncoderConfig encoder;
  LossWeights weights;
  int batch_size = 128;
  double lr = 1e-3;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 0;
  std::size_t eval_k = 10;
  bool filter_seen = true;

  void validate() const {
    encoder.validate();
    weights.validate();
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (max_epochs < 0) throw ConfigError("train: max_epochs must be >= 0");
    if (eval_k < 1) throw ConfigError("train: eval k must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  }
};

struct EpochLog {
  int epoch = 0;
  double total = 0, ce_pos = 0, ce_neg = 0, contrastive = 0;
  double val_metric = 0;
  double wall_seconds = 0;
};

template <typename Real>
struct TrainResult {
  ModelParams<Real> params;  // best checkpoint by validation metric
  int best_epoch = 0;
  double best_metric = 0;
  std::vector<EpochLog> log;
};

// Strict-improvement early stopping: stop once `patience` consecutive
// epochs fail to beat the best validation metric. The earliest possible
// stop is therefore after patience + 1 epochs.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("early stopping: patience must be >= 1");
  }

  // Returns true when `metric` strictly improves on the best so far.
  bool observe(double metric) {
    ++count_;
    if (metric > best_) {
      best_ = metric;
      best_index_ = count_;
      since_best_ = 0;
      return true;
    }
    ++since_best_;
    return false;
  }

  bool should_stop() const { return since_best_ >= patience_; }
  double best() const { return best_; }
  int best_index() const { return best_index_; }

 private:
  int patience_;
  int count_ = 0;
  int best_index_ = 0;
  int since_best_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

// Epoch loop over seeded user batches with early stopping on validation
// NDCG_p@eval_k. Returns the best checkpoint; with max_epochs == 0 the
// untrained initialization comes back unchanged.
template <typename Real = float>
TrainResult<Real> train(const SplitBundle& bundle, const TrainConfig& config,
                        const std::function<void(const EpochLog&)>& on_epoch = nullptr) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const int num_items = bundle.train.log.num_items();
  if (num_items < 1) throw DataError("train: no items in training data");

  const UserSequences seqs = build_sequences(bundle.train, config.encoder.max_len);
  const std::size_t l = static_cast<std::size_t>(config.encoder.max_len);

  // Users that yield at least one prediction pair for the variant's main
  // cross-entropy; all variants batch the same way, which keeps zero-weight
  // pnfrec and sasrec_p runs on identical batch schedules.
  std::vector<int> eligible;
  for (std::size_t u = 0; u < seqs.full.size(); ++u) {
    const std::size_t m = variant_uses_full_sequence(config.variant)
                              ? std::min(seqs.full[u].size(), l)
                              : seqs.pos[u].size();
    if (m >= 2) eligible.push_back(static_cast<int>(u));
  }
  if (eligible.empty()) {
    throw DataError("train: no user has enough interactions for variant " +
                    std::string(variant_name(config.variant)));
  }

  ModelParams<Real> model =
      ModelParams<Real>::init(config.variant, config.encoder, num_items, config.seed);
  std::vector<Parameter<Real>*> params = model.all();
  std::vector<const Tensor<Real>*> param_values;
  for (Parameter<Real>* p : params) param_values.push_back(&p->value);
  AdamState<Real> adam(param_values,
                       AdamConfig<Real>{static_cast<Real>(config.lr), Real(0.9),
                                        Real(0.999), Real(1e-8)});

  Rng shuffle_rng = Rng::derive(config.seed, "shuffle");
  Rng pos_drop_rng = Rng::derive(config.seed, "dropout/pos");
  Rng neg_drop_rng = Rng::derive(config.seed, "dropout/neg");

  TrainResult<Real> result;
  result.params = model;  // covers max_epochs == 0
  EarlyStopper stopper(config.patience);

  const auto elapsed = [&start]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::vector<int> order = eligible;
    shuffle_rng.shuffle(order);

    double sum_total = 0, sum_pos = 0, sum_neg = 0, sum_contr = 0;
    std::size_t num_batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const std::span<const int> batch(order.data() + begin, end - begin);

      ad::Graph<Real> g;
      GraphBinding<Real> bind(g);
      const ForwardBatch<Real> fb = forward_batch(g, bind, model, seqs, batch,
                                                  /*train_mode=*/true, &pos_drop_rng,
                                                  &neg_drop_rng);
      LossParts<Real> parts;
      try {
        parts = loss_composite(g, fb, config.weights);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(num_batches) + ")");
      }
      g.backward(parts.total);

      std::vector<Tensor<Real>*> pvals;
      std::vector<Tensor<Real>> zero_store;
      std::vector<const Tensor<Real>*> grads;
      pvals.reserve(params.size());
      grads.reserve(params.size());
      zero_store.reserve(params.size());
      for (Parameter<Real>* p : params) {
        pvals.push_back(&p->value);
        if (const auto var = bind.find(*p)) {
          grads.push_back(&g.grad(*var));
        } else {
          zero_store.emplace_back(p->value.shape());
          grads.push_back(&zero_store.back());
        }
      }
      adam.step(pvals, grads);

      sum_total += parts.value_total(g);
      sum_pos += parts.value_ce_positive(g);
      sum_neg += parts.value_ce_negative(g);
      sum_contr += parts.value_contrastive(g);
      ++num_batches;
    }

    const double val =
        validation_ndcg_positive(model, bundle.val, config.eval_k, config.filter_seen);
    const bool improved = stopper.observe(val);
    if (improved) {
      result.params = model;
      result.best_epoch = epoch;
      result.best_metric = val;
    }

    EpochLog entry;
    entry.epoch = epoch;
    const double nb = static_cast<double>(num_batches);
    entry.total = sum_total / nb;
    entry.ce_pos = sum_pos / nb;
    entry.ce_neg = sum_neg / nb;
    entry.contrastive = sum_contr / nb;
    entry.val_metric = val;
    entry.wall_seconds = elapsed();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);

    if (stopper.should_stop()) break;
  }
  return result;
}

struct TuneGrid {
  std::vector<double> alpha_values;
  std::vector<double> beta_values;
};

struct SweepRow {
  int phase = 0;  // 1 = alpha sweep (beta fixed 0), 2 = beta sweep at best alpha
  double alpha = 0, beta = 0;
  std::uint64_t seed = 0;
  double val_metric = 0;
  int best_epoch = 0;
};

template <typename Real>
struct TuneResult {
  double best_alpha = 0;
  double best_beta = 0;
  std::vector<SweepRow> rows;
  TrainResult<Real> best;
  std::vector<double> alphas;                 // canonical phase-1 grid
  std::vector<TrainResult<Real>> phase1;      // aligned with `alphas`
};

namespace detail {

inline std::vector<double> canonical_grid(std::vector<double> values, const char* name) {
  if (values.empty()) throw ConfigError(std::string("tune: empty ") + name + " grid");
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string("tune: ") + name + " grid values must lie in [0, 1]");
    }
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

template <typename F>
void run_indexed(std::size_t count, int jobs, F&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(jobs, 1), count == 0 ? 1 : count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&fn, w, workers, count]() {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace detail

// Incremental coefficient search: sweep alpha with beta = 0, then sweep
// beta at the winning alpha. Grids are canonicalized to ascending order,
// run seeds are base seed + canonical grid index, ties break toward the
// smaller coefficient, and the beta = 0 point reuses the phase-1 run.
template <typename Real = float>
TuneResult<Real> tune_incremental(const SplitBundle& bundle, const TrainConfig& base,
                                  const TuneGrid& grid, int jobs = 1) {
  base.validate();
  const std::vector<double> alphas = detail::canonical_grid(grid.alpha_values, "alpha");
  const std::vector<double> betas = detail::canonical_grid(grid.beta_values, "beta");

  const auto run_point = [&bundle, &base](double alpha, double beta, std::uint64_t seed) {
    TrainConfig cfg = base;
    cfg.weights = LossWeights{alpha, beta};
    cfg.seed = seed;
    return train<Real>(bundle, cfg);
  };

  TuneResult<Real> result;
  std::vector<TrainResult<Real>> phase1(alphas.size());
  detail::run_indexed(alphas.size(), jobs, [&](std::size_t i) {
    phase1[i] = run_point(alphas[i], 0.0, base.seed + i);
  });

  std::size_t best_alpha_idx = 0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    result.rows.push_back({1, alphas[i], 0.0, base.seed + i, phase1[i].best_metric,
                           phase1[i].best_epoch});
    if (phase1[i].best_metric > phase1[best_alpha_idx].best_metric) best_alpha_idx = i;
  }
  result.best_alpha = alphas[best_alpha_idx];

  // Phase 2 at the chosen alpha. Every beta keeps its canonical grid index
  // for seeding whether or not the zero point is re-run.
  std::vector<std::optional<TrainResult<Real>>> phase2(betas.size());
  std::vector<std::size_t> to_run;
  for (std::size_t j = 0; j < betas.size(); ++j) {
    if (betas[j] == 0.0) continue;  // reuse the phase-1 run
    to_run.push_back(j);
  }
  detail::run_indexed(to_run.size(), jobs, [&](std::size_t t) {
    const std::size_t j = to_run[t];
    phase2[j] = run_point(result.best_alpha, betas[j], base.seed + alphas.size() + j);
  });

  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t best_beta_idx = 0;
  bool best_is_phase1 = false;
  for (std::size_t j = 0; j < betas.size(); ++j) {
    const bool reused = !phase2[j].has_value();
    const TrainResult<Real>& r = reused ? phase1[best_alpha_idx] : *phase2[j];
    if (!reused) {
      result.rows.push_back({2, result.best_alpha, betas[j], base.seed + alphas.size() + j,
                             r.best_metric, r.best_epoch});
    }
    if (r.best_metric > best_metric) {
      best_metric = r.best_metric;
      best_beta_idx = j;
      best_is_phase1 = reused;
    }
  }
  result.best_beta = betas[best_beta_idx];
  result.best = best_is_phase1 ? phase1[best_alpha_idx] : std::move(*phase2[best_beta_idx]);
  result.alphas = alphas;
  result.phase1 = std::move(phase1);
  return result;
}

}  // namespace pnfrec
