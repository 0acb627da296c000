// Acceptance suite: one pass/fail line per criterion. Criterion 7 is a
// directional check on stochastic training runs; when it fails it prints
// SOFT FAIL and does not fail the suite. Criterion 8 (a full ML-1M sign
// check, hours of CPU) lives in its own binary, pnfrec_acceptance_ml1m.

#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pnfrec/dataio.hpp"
#include "pnfrec/evaluate.hpp"
#include "pnfrec/losses.hpp"
#include "pnfrec/metrics.hpp"
#include "pnfrec/seqmodel.hpp"
#include "pnfrec/synth.hpp"
#include "pnfrec/training.hpp"
#include "support/finite_diff.hpp"
#include "support/run_cli.hpp"
#include "support/tmpdir.hpp"

using namespace pnfrec;
using pnfrec::testing::check_model;
using pnfrec::testing::check_op;
using pnfrec::testing::DGraph;
using pnfrec::testing::DVar;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

// ---- criterion 1: gradient correctness --------------------------------

UserSequences toy_sequences() {
  UserSequences seqs;
  seqs.max_len = 4;
  seqs.full = {{0, 1, 2, 3, 4}, {2, 3}};
  seqs.full_pos = {{1, 1, 1, 0, 0}, {1, 1}};
  seqs.pos = {{0, 1, 2}, {2, 3}};
  seqs.neg = {{3, 4}, {}};
  return seqs;
}

bool criterion_1(std::string& evidence) {
  Timer timer;
  double worst = 0;
  const double tol = 1e-5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto track = [&worst](const pnfrec::testing::GradCheck& r) {
      worst = std::max(worst, r.max_rel_err);
    };
    track(check_op(seed, {{3, 4}, {3, 4}},
                   [](DGraph& g, const std::vector<DVar>& v) { return g.add(v[0], v[1]); }));
    track(check_op(seed, {{3, 4}, {3, 4}},
                   [](DGraph& g, const std::vector<DVar>& v) { return g.sub(v[0], v[1]); }));
    track(check_op(seed, {{3, 4}, {3, 4}},
                   [](DGraph& g, const std::vector<DVar>& v) { return g.mul(v[0], v[1]); }));
    track(check_op(seed, {{4, 3}, {3, 5}},
                   [](DGraph& g, const std::vector<DVar>& v) { return g.matmul(v[0], v[1]); }));
    track(check_op(seed, {{4, 3}, {5, 3}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.matmul_nt(v[0], v[1]);
    }));
    track(check_op(seed, {{4, 3}, {3}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.add_rowvec(v[0], v[1]);
    }));
    track(check_op(seed, {{4, 7}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.softmax_rows(v[0]);
    }));
    track(check_op(seed, {{5, 6}, {6}, {6}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.layer_norm(v[0], v[1], v[2], 1e-8);
    }));
    track(check_op(seed, {{6, 3}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.gather_rows(v[0], {0, 2, 2, 5, 1});
    }));
    track(check_op(seed, {{5, 4}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.normalize_rows(v[0]);
    }));
    track(check_op(seed, {{6}, {6}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.cosine_similarity(v[0], v[1]);
    }));
    track(check_op(seed, {{4, 8}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.cross_entropy_from_logits(v[0], {1, 0, 7, 3});
    }));
    track(check_op(seed, {{4, 5}},
                   [](DGraph& g, const std::vector<DVar>& v) { return g.row_sum(v[0]); }));
    track(check_op(seed, {{4, 5}, {4, 5}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.row_dot(v[0], v[1]);
    }));
    track(check_op(seed, {{3, 6}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.slice_cols(v[0], 1, 4);
    }));
    track(check_op(seed, {{3, 2}, {3, 4}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.concat_cols({v[0], v[1]});
    }));
    track(check_op(seed, {{2, 4}, {3, 4}}, [](DGraph& g, const std::vector<DVar>& v) {
      return g.concat_rows({v[0], v[1]});
    }));
    track(check_op(
        seed, {{3, 3}}, [](DGraph& g, const std::vector<DVar>& v) { return g.exp(v[0]); }));
    track(check_op(
        seed, {{3, 3}}, [](DGraph& g, const std::vector<DVar>& v) { return g.log(v[0]); },
        1e-5, [](Rng& r) { return std::abs(r.normal()) + 0.5; }));
    track(check_op(
        seed, {{4, 4}}, [](DGraph& g, const std::vector<DVar>& v) { return g.relu(v[0]); },
        1e-5, [](Rng& r) {
          const double x = r.normal();
          return x + (x >= 0 ? 0.05 : -0.05);
        }));
  }

  // Full composite loss on the 2-user, 5-item toy model.
  const UserSequences seqs = toy_sequences();
  const std::vector<int> users{0, 1};
  for (const ModelVariant variant : {ModelVariant::pnfrec, ModelVariant::sasrec_c}) {
    EncoderConfig cfg;
    cfg.dim = 4;
    cfg.num_blocks = 1;
    cfg.max_len = 4;
    cfg.dropout = 0.0;
    ModelParams<double> model = ModelParams<double>::init(variant, cfg, 5, 77);
    const LossWeights weights =
        variant == ModelVariant::pnfrec ? LossWeights{0.7, 0.5} : LossWeights{0.0, 0.6};
    const auto result = check_model(
        model, [&](ad::Graph<double>& g, GraphBinding<double>& bind,
                   const ModelParams<double>& m) {
          const auto fb = forward_batch(g, bind, m, seqs, users, true, nullptr, nullptr);
          return loss_composite(g, fb, weights).total;
        });
    worst = std::max(worst, result.max_rel_err);
  }

  const double secs = timer.seconds();
  evidence = "max rel. err " + fmt(worst, 9) + " over 20 seeds, " + fmt(secs, 1) + "s";
  return worst < tol && secs < 60.0;
}

// ---- criterion 2: degenerate-weights identity ---------------------------

bool criterion_2(std::string& evidence) {
  Timer timer;
  SynthConfig scfg;
  scfg.n_users = 500;
  scfg.n_items = 120;
  scfg.n_clusters = 6;
  scfg.interactions_per_user = 25;
  scfg.seed = 5;
  const LabeledLog labeled =
      assign_feedback(kcore_filter(generate(scfg).log, 5), kSynthThreshold);
  const SplitBundle bundle = temporal_split(labeled, 0.9, 6);

  TrainConfig cfg;
  cfg.variant = ModelVariant::pnfrec;
  cfg.encoder.dim = 16;
  cfg.encoder.num_blocks = 2;
  cfg.encoder.max_len = 12;
  cfg.batch_size = 128;
  cfg.max_epochs = 5;
  cfg.patience = 100;
  cfg.seed = 40;
  TrainConfig sp = cfg;
  sp.variant = ModelVariant::sasrec_p;

  TrainResult<float> a = train<float>(bundle, cfg);
  TrainResult<float> b = train<float>(bundle, sp);

  const auto identical = [](const Tensor<float>& x, const Tensor<float>& y) {
    return x.shape() == y.shape() &&
           std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
  };
  bool ok = a.log.size() == 5 && b.log.size() == 5;
  ok = ok && identical(a.params.item_table.value, b.params.item_table.value);
  ok = ok && identical(a.params.primary.pos_table.value, b.params.primary.pos_table.value);
  std::size_t tensors = 2;
  for (std::size_t bi = 0; ok && bi < a.params.primary.blocks.size(); ++bi) {
    const BlockParams<float>& ba = a.params.primary.blocks[bi];
    const BlockParams<float>& bb = b.params.primary.blocks[bi];
    const Parameter<float>* pa[] = {&ba.wq, &ba.bq, &ba.wk, &ba.bk, &ba.wv, &ba.bv,
                                    &ba.wo, &ba.bo, &ba.ln1_gamma, &ba.ln1_beta,
                                    &ba.ff1_w, &ba.ff1_b, &ba.ff2_w, &ba.ff2_b,
                                    &ba.ln2_gamma, &ba.ln2_beta};
    const Parameter<float>* pb[] = {&bb.wq, &bb.bq, &bb.wk, &bb.bk, &bb.wv, &bb.bv,
                                    &bb.wo, &bb.bo, &bb.ln1_gamma, &bb.ln1_beta,
                                    &bb.ff1_w, &bb.ff1_b, &bb.ff2_w, &bb.ff2_b,
                                    &bb.ln2_gamma, &bb.ln2_beta};
    for (std::size_t t = 0; t < 16; ++t) {
      ok = ok && identical(pa[t]->value, pb[t]->value);
      ++tensors;
    }
  }
  const double secs = timer.seconds();
  evidence = std::to_string(tensors) + " positive-branch tensors bit-identical after 5 epochs, " +
             fmt(secs, 1) + "s";
  return ok && secs < 120.0;
}

// ---- criterion 3: contrastive closed forms ------------------------------

double contrastive_of(const Tensor<double>& table, const Tensor<double>& hidden,
                      std::vector<int> targets, std::vector<int> neg_items) {
  DGraph g;
  ForwardBatch<double> fb;
  fb.item_table_var = g.leaf(table);
  fb.contr_hidden = g.leaf(hidden);
  fb.contr_targets = std::move(targets);
  fb.contr_spans.emplace_back(0, hidden.rows());
  fb.contr_neg_items.push_back(std::move(neg_items));
  const auto lc = loss_contrastive(g, fb);
  return lc ? g.scalar_value(*lc) : 0.0;
}

bool criterion_3(std::string& evidence) {
  // Empty negative sequence: the term is exactly zero.
  EncoderConfig cfg;
  cfg.dim = 4;
  cfg.num_blocks = 0;
  cfg.max_len = 4;
  cfg.dropout = 0.0;
  const ModelParams<double> model = ModelParams<double>::init(ModelVariant::pnfrec, cfg, 5, 1);
  UserSequences seqs;
  seqs.max_len = 4;
  seqs.full = {{0, 1}};
  seqs.full_pos = {{1, 1}};
  seqs.pos = {{0, 1}};
  seqs.neg = {{}};
  const std::vector<int> users{0};
  DGraph g;
  GraphBinding<double> bind(g);
  const auto fb = forward_batch(g, bind, model, seqs, users, true, nullptr, nullptr);
  const LossParts<double> parts = loss_composite(g, fb, {0.5, 0.5});
  const double empty_term = parts.value_contrastive(g);

  // Equal similarities against two negatives: log(1 + 2) per term.
  const Tensor<double> same =
      Tensor<double>::from_rows({{0, 0}, {3, 4}, {3, 4}, {3, 4}, {3, 4}});
  const double equal_term =
      contrastive_of(same, Tensor<double>::from_rows({{3, 4}}), {0}, {1, 2});

  // f+ = 1, two negatives at f- = -1: -log(e / (e + 2/e)).
  const Tensor<double> opposed =
      Tensor<double>::from_rows({{0, 0}, {5, 0}, {-2, 0}, {-2, 0}});
  const double hand_term =
      contrastive_of(opposed, Tensor<double>::from_rows({{1, 0}}), {0}, {1, 2});

  const bool ok = empty_term == 0.0 && std::abs(equal_term - std::log(3.0)) < 1e-6 &&
                  std::abs(hand_term - 0.23954) < 1e-4;
  evidence = "empty=" + fmt(empty_term, 1) + ", equal-sim=" + fmt(equal_term, 6) +
             " (log3=" + fmt(std::log(3.0), 6) + "), hand=" + fmt(hand_term, 6);
  return ok;
}

// ---- criterion 4: metric oracle equivalence -----------------------------

bool criterion_4(std::string& evidence) {
  Rng rng(404);
  std::vector<RankedCase> cases;
  for (int u = 0; u < 50; ++u) {
    std::vector<int> items(60);
    std::iota(items.begin(), items.end(), 0);
    rng.shuffle(items);
    RankedCase c;
    c.ranked.assign(items.begin(), items.begin() + 15);
    c.ground_truth = static_cast<int>(rng.uniform_int(60));
    c.positive = rng.uniform() < 0.6;
    cases.push_back(std::move(c));
  }
  const EvalReport fast = split_eval(cases, 10);

  // Brute force per user, fully independent arithmetic.
  double hp = 0, hn = 0, np = 0, nn = 0;
  std::size_t cp = 0, cn = 0;
  for (const RankedCase& c : cases) {
    std::size_t rank = 0;
    for (std::size_t i = 0; i < c.ranked.size(); ++i) {
      if (c.ranked[i] == c.ground_truth) {
        rank = i + 1;
        break;
      }
    }
    const double hr = rank >= 1 && rank <= 10 ? 1.0 : 0.0;
    const double nd =
        rank >= 1 && rank <= 10 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
    if (c.positive) {
      hp += hr;
      np += nd;
      ++cp;
    } else {
      hn += hr;
      nn += nd;
      ++cn;
    }
  }
  const bool exact = fast.hr_p == hp / static_cast<double>(cp) &&
                     fast.hr_n == hn / static_cast<double>(cn) &&
                     fast.ndcg_p == np / static_cast<double>(cp) &&
                     fast.ndcg_n == nn / static_cast<double>(cn) &&
                     fast.n_users_p == cp && fast.n_users_n == cn;

  const std::vector<int> ranked{7, 8, 9};
  const bool spots = ndcg_at_k(ranked, 7, 10) == 1.0 &&
                     std::abs(ndcg_at_k(ranked, 8, 10) - 0.63093) < 1e-5 &&
                     ndcg_at_k(ranked, 9, 10) == 0.5;
  evidence = std::string("vectorized == brute force on 50 users (exact), spot NDCG 1/") +
             fmt(ndcg_at_k(ranked, 8, 10), 5) + "/" + fmt(ndcg_at_k(ranked, 9, 10), 2);
  return exact && spots;
}

// ---- criterion 5: leakage -----------------------------------------------

bool criterion_5(std::string& evidence) {
  Timer timer;
  std::size_t checked_cases = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SynthConfig cfg;
    cfg.n_users = 150;
    cfg.n_items = 40;
    cfg.n_clusters = 5;
    cfg.interactions_per_user = 12;
    cfg.seed = seed;
    const LabeledLog labeled = assign_feedback(generate(cfg).log, kSynthThreshold);
    const SplitBundle bundle = temporal_split(labeled, 0.9, seed * 31 + 7);
    std::set<std::pair<int, std::int64_t>> train_keys;
    for (const Interaction& r : bundle.train.log.records) train_keys.emplace(r.user, r.ts);
    for (const auto* cases : {&bundle.val, &bundle.test}) {
      for (const EvalCase& c : *cases) {
        if (train_keys.count({c.user, c.ground_truth.ts}) != 0) {
          evidence = "ground truth leaked into train at seed " + std::to_string(seed);
          return false;
        }
        ++checked_cases;
      }
    }
  }
  const double secs = timer.seconds();
  evidence = "no ground-truth key in training data across 100 splits (" +
             std::to_string(checked_cases) + " held-out users), " + fmt(secs, 1) + "s";
  return secs < 60.0;
}

// ---- criteria 6 and 7: synthetic negative suppression -------------------

struct SuppressionOutcome {
  double pnfrec_delta = 0, sasrec_delta = 0;
  double pnfrec_ndcg_p = 0, sasrec_p_ndcg_p = 0;
  double alpha0_delta = 0, alpha25_delta = 0;
  std::vector<std::string> per_seed;
  double seconds = 0;
};

EvalReport test_report(const ModelParams<float>& params, const SplitBundle& bundle) {
  const auto ranked = rank_cases(params, bundle.test, 10, /*filter_seen=*/true);
  return split_eval(ranked, 10);
}

const SuppressionOutcome& suppression_experiment() {
  static std::optional<SuppressionOutcome> cached;
  if (cached) return *cached;
  Timer timer;
  SuppressionOutcome out;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  for (const std::uint64_t seed : seeds) {
    SynthConfig scfg;  // the default synthetic configuration
    scfg.seed = seed;
    const LabeledLog labeled =
        assign_feedback(kcore_filter(generate(scfg).log, 5), kSynthThreshold);
    const SplitBundle bundle = temporal_split(labeled, 0.9, seed + 100);

    TrainConfig base;
    base.variant = ModelVariant::pnfrec;
    base.encoder.dim = 32;
    base.encoder.num_blocks = 1;
    base.encoder.num_heads = 1;
    base.encoder.max_len = 24;
    base.encoder.dropout = 0.2;
    base.batch_size = 256;
    base.lr = 1e-3;
    base.max_epochs = 30;
    base.patience = 5;
    base.seed = 1000 * seed;

    TuneGrid grid;
    grid.alpha_values = {0.0, 0.25, 0.5};
    grid.beta_values = {0.0, 0.1};
    const TuneResult<float> tuned = tune_incremental<float>(bundle, base, grid);

    TrainConfig sp_cfg = base;
    sp_cfg.variant = ModelVariant::sasrec_p;
    sp_cfg.seed = 1000 * seed + 500;
    const TrainResult<float> sasrec_p_run = train<float>(bundle, sp_cfg);

    TrainConfig full_cfg = base;
    full_cfg.variant = ModelVariant::sasrec;
    full_cfg.encoder.max_len = 48;  // full interleaved sequence
    full_cfg.seed = 1000 * seed + 501;
    const TrainResult<float> sasrec_run = train<float>(bundle, full_cfg);

    const EvalReport r_tuned = test_report(tuned.best.params, bundle);
    const EvalReport r_sp = test_report(sasrec_p_run.params, bundle);
    const EvalReport r_full = test_report(sasrec_run.params, bundle);
    EvalReport r_a0, r_a25;
    for (std::size_t i = 0; i < tuned.alphas.size(); ++i) {
      if (tuned.alphas[i] == 0.0) r_a0 = test_report(tuned.phase1[i].params, bundle);
      if (tuned.alphas[i] == 0.25) r_a25 = test_report(tuned.phase1[i].params, bundle);
    }

    out.pnfrec_delta += r_tuned.delta_ndcg / 3.0;
    out.pnfrec_ndcg_p += r_tuned.ndcg_p / 3.0;
    out.sasrec_delta += r_full.delta_ndcg / 3.0;
    out.sasrec_p_ndcg_p += r_sp.ndcg_p / 3.0;
    out.alpha0_delta += r_a0.delta_ndcg / 3.0;
    out.alpha25_delta += r_a25.delta_ndcg / 3.0;
    out.per_seed.push_back(
        "seed " + std::to_string(seed) + ": tuned (alpha=" + fmt(tuned.best_alpha, 2) +
        ", beta=" + fmt(tuned.best_beta, 2) + ") dNDCG=" + fmt(r_tuned.delta_ndcg) +
        " NDCGp=" + fmt(r_tuned.ndcg_p) + " | sasrec dNDCG=" + fmt(r_full.delta_ndcg) +
        " | sasrec_p NDCGp=" + fmt(r_sp.ndcg_p) + " | pn dNDCG@a0=" + fmt(r_a0.delta_ndcg) +
        " @a25=" + fmt(r_a25.delta_ndcg));
  }
  out.seconds = timer.seconds();
  cached = std::move(out);
  return *cached;
}

bool criterion_6(std::string& evidence) {
  const SuppressionOutcome& o = suppression_experiment();
  for (const std::string& line : o.per_seed) std::cout << "    " << line << "\n";
  const bool suppression = o.pnfrec_delta > o.sasrec_delta;
  const bool quality = o.pnfrec_ndcg_p >= 0.95 * o.sasrec_p_ndcg_p;
  evidence = "3-seed means: dNDCG " + fmt(o.pnfrec_delta) + " (pnfrec) vs " +
             fmt(o.sasrec_delta) + " (sasrec); NDCG_p " + fmt(o.pnfrec_ndcg_p) +
             " vs 0.95*" + fmt(o.sasrec_p_ndcg_p) + " (sasrec_p); " + fmt(o.seconds, 0) + "s";
  return suppression && quality && o.seconds < 1800.0;
}

bool criterion_7(std::string& evidence) {
  const SuppressionOutcome& o = suppression_experiment();
  evidence = "3-seed mean dNDCG@10: " + fmt(o.alpha25_delta) + " at alpha=0.25 vs " +
             fmt(o.alpha0_delta) + " at alpha=0 (beta=0)";
  return o.alpha25_delta > o.alpha0_delta;
}

// ---- criterion 9: determinism through the CLI ---------------------------

bool criterion_9(std::string& evidence) {
  pnfrec::testing::TmpDir dir("acceptance9");
  const auto run = [&](const std::string& args) {
    const auto r = pnfrec::testing::run_cli(args, dir.path());
    if (r.exit_code != 0) {
      std::cout << "    command failed: " << args << "\n" << r.output;
    }
    return r.exit_code == 0;
  };
  if (!run("synth --users 300 --items 80 --clusters 5 --per-user 24 --seed 13 --out-dir s")) {
    evidence = "synth failed";
    return false;
  }
  if (!run("prepare --input s/interactions.tsv --threshold 3 --max-len 12 --seed 13 "
           "--out-dir split")) {
    evidence = "prepare failed";
    return false;
  }
  const std::string train_args =
      "train --input split --variant pnfrec --alpha 0.2 --beta 0.1 --d 16 --blocks 1 "
      "--batch-size 64 --max-epochs 4 --seed 3 --out-dir ";
  if (!run(train_args + "t1") || !run(train_args + "t2")) {
    evidence = "train failed";
    return false;
  }
  const std::string eval_args = "evaluate --input split --checkpoint t1/checkpoint.pnfr "
                                "--k 10 --out-dir ";
  if (!run(eval_args + "e1") || !run(eval_args + "e2")) {
    evidence = "evaluate failed";
    return false;
  }

  std::size_t identical = 0;
  bool ok = true;
  const auto same = [&](const std::string& a, const std::string& b) {
    const bool eq =
        pnfrec::testing::read_file(dir / a) == pnfrec::testing::read_file(dir / b);
    ok = ok && eq;
    if (eq) ++identical;
    if (!eq) std::cout << "    artifact differs: " << a << " vs " << b << "\n";
  };
  same("t1/checkpoint.pnfr", "t2/checkpoint.pnfr");
  same("t1/manifest.txt", "t2/manifest.txt");
  same("e1/report.tsv", "e2/report.tsv");
  same("e1/report.txt", "e2/report.txt");
  same("e1/manifest.txt", "e2/manifest.txt");
  const bool logs_match =
      pnfrec::testing::strip_last_column(pnfrec::testing::read_file(dir / "t1/training_log.tsv")) ==
      pnfrec::testing::strip_last_column(pnfrec::testing::read_file(dir / "t2/training_log.tsv"));
  ok = ok && logs_match;
  evidence = std::to_string(identical) +
             " artifacts byte-identical across reruns; training logs identical modulo the "
             "wall-clock column";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted{1, 2, 3, 4, 5, 6, 7, 9};
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--criterion" && i + 1 < argc) {
      wanted.clear();
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) wanted.push_back(std::stoi(tok));
    } else {
      std::cerr << "usage: pnfrec_acceptance [--criterion 1,2,...]\n";
      return 2;
    }
  }

  struct Entry {
    int id;
    const char* name;
    bool (*fn)(std::string&);
    bool soft;
  };
  const Entry entries[] = {
      {1, "gradient correctness vs central finite differences", criterion_1, false},
      {2, "pnfrec(alpha=beta=0) == sasrec_p bit for bit", criterion_2, false},
      {3, "contrastive closed forms", criterion_3, false},
      {4, "split metrics equal the brute-force oracle", criterion_4, false},
      {5, "no train/test leakage across 100 random splits", criterion_5, false},
      {6, "synthetic negative suppression with tuned coefficients", criterion_6, false},
      {7, "alpha sweep: dNDCG higher at 0.25 than at 0", criterion_7, true},
      {9, "byte-identical artifacts on rerun", criterion_9, false},
  };

  bool all_ok = true;
  for (const Entry& e : entries) {
    bool selected = false;
    for (int w : wanted) selected = selected || w == e.id;
    if (!selected) continue;
    std::string evidence;
    bool ok = false;
    try {
      ok = e.fn(evidence);
    } catch (const std::exception& ex) {
      evidence = std::string("exception: ") + ex.what();
    }
    if (ok) {
      std::cout << "PASS criterion " << e.id << ": " << e.name << " (" << evidence << ")\n";
    } else if (e.soft) {
      std::cout << "SOFT FAIL criterion " << e.id << ": " << e.name << " (" << evidence
                << ") — directional check; flags investigation, not a suite failure\n";
    } else {
      std::cout << "FAIL criterion " << e.id << ": " << e.name << " (" << evidence << ")\n";
      all_ok = false;
    }
  }
  return all_ok ? 0 : 1;
}
