#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pnfrec/dataio.hpp"
#include "pnfrec/evaluate.hpp"
#include "pnfrec/kvfile.hpp"
#include "pnfrec/losses.hpp"
#include "pnfrec/metrics.hpp"
#include "pnfrec/seqmodel.hpp"
#include "pnfrec/synth.hpp"
#include "pnfrec/training.hpp"

namespace fs = std::filesystem;
using namespace pnfrec;

namespace {

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
  return buf;
}

// --out-dir (or PNFREC_OUT_DIR) names the run directory itself; without
// either, runs land under ./runs/<timestamp>-seed<seed>.
fs::path resolve_out_dir(const std::string& flag_value, std::uint64_t seed) {
  fs::path dir = flag_value.empty()
                     ? fs::path("runs") / (timestamp_utc() + "-seed" + std::to_string(seed))
                     : fs::path(flag_value);
  fs::create_directories(dir);
  return dir;
}

struct CommonModelOpts {
  int dim = 64;
  int blocks = 2;
  int heads = 1;
  int max_len = 0;  // 0: take l from the split's meta.txt
  double dropout = 0.2;
  double lr = 1e-3;
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 0;
  std::size_t k = 10;
  bool filter_seen = true;
};

void add_model_options(CLI::App* cmd, CommonModelOpts& o) {
  cmd->add_option("--d", o.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--blocks", o.blocks, "Self-attention blocks")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--heads", o.heads, "Attention heads")->check(CLI::PositiveNumber);
  cmd->add_option("--max-len", o.max_len,
                  "Maximum sequence length (default: l from the split metadata)");
  cmd->add_option("--dropout", o.dropout, "Dropout rate");
  cmd->add_option("--lr", o.lr, "Learning rate");
  cmd->add_option("--batch-size", o.batch_size, "Users per batch")->check(CLI::PositiveNumber);
  cmd->add_option("--max-epochs", o.max_epochs, "Epoch budget")->check(CLI::NonNegativeNumber);
  cmd->add_option("--patience", o.patience, "Early-stopping patience")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--k", o.k, "Validation metric cutoff");
  cmd->add_flag("--filter-seen,!--no-filter-seen", o.filter_seen,
                "Drop already-seen items from recommendations (default on)");
}

TrainConfig make_train_config(const CommonModelOpts& o, const SplitMeta& meta) {
  TrainConfig cfg;
  cfg.encoder.dim = o.dim;
  cfg.encoder.num_blocks = o.blocks;
  cfg.encoder.num_heads = o.heads;
  cfg.encoder.max_len = o.max_len > 0 ? o.max_len : meta.max_len;
  cfg.encoder.dropout = o.dropout;
  cfg.lr = o.lr;
  cfg.batch_size = o.batch_size;
  cfg.max_epochs = o.max_epochs;
  cfg.patience = o.patience;
  cfg.seed = o.seed;
  cfg.eval_k = o.k;
  cfg.filter_seen = o.filter_seen;
  return cfg;
}

void manifest_common(KvFile& m, const std::string& command) {
  m.set("command", command);
  m.set("pnfrec_version", std::string("0.1.0"));
  m.set("checkpoint_format_version", static_cast<std::int64_t>(kCheckpointVersion));
}

void manifest_model_opts(KvFile& m, const CommonModelOpts& o, const TrainConfig& cfg) {
  m.set("d", static_cast<std::int64_t>(cfg.encoder.dim));
  m.set("blocks", static_cast<std::int64_t>(cfg.encoder.num_blocks));
  m.set("heads", static_cast<std::int64_t>(cfg.encoder.num_heads));
  m.set("max_len", static_cast<std::int64_t>(cfg.encoder.max_len));
  m.set("dropout", cfg.encoder.dropout);
  m.set("lr", cfg.lr);
  m.set("batch_size", static_cast<std::int64_t>(cfg.batch_size));
  m.set("max_epochs", static_cast<std::int64_t>(cfg.max_epochs));
  m.set("patience", static_cast<std::int64_t>(cfg.patience));
  m.set("seed", o.seed);
  m.set("k", static_cast<std::uint64_t>(cfg.eval_k));
  m.set("filter_seen", std::string(cfg.filter_seen ? "true" : "false"));
}

// ---- synth ----

struct SynthOpts {
  SynthConfig cfg;
  std::string out_dir;
};

int run_synth(const SynthOpts& o) {
  const fs::path dir = resolve_out_dir(o.out_dir, o.cfg.seed);
  const SynthResult result = generate(o.cfg);
  write_interactions_file(dir / "interactions.tsv", result.log);
  write_cluster_sidecar(dir / "clusters.tsv", result);

  std::size_t negatives = 0;
  for (const Interaction& r : result.log.records) {
    if (r.value < kSynthThreshold) ++negatives;
  }
  KvFile m;
  manifest_common(m, "synth");
  m.set("users", static_cast<std::int64_t>(o.cfg.n_users));
  m.set("items", static_cast<std::int64_t>(o.cfg.n_items));
  m.set("clusters", static_cast<std::int64_t>(o.cfg.n_clusters));
  m.set("per_user", static_cast<std::int64_t>(o.cfg.interactions_per_user));
  m.set("like_in", o.cfg.like_prob_in_cluster);
  m.set("like_off", o.cfg.like_prob_off_cluster);
  m.set("stickiness", o.cfg.markov_stickiness);
  m.set("seed", o.cfg.seed);
  m.set("artifact.interactions", std::string("interactions.tsv"));
  m.set("artifact.clusters", std::string("clusters.tsv"));
  m.write(dir / "manifest.txt");

  std::cout << "synthetic log: " << result.log.num_users() << " users, "
            << result.log.num_items() << " items, " << result.log.records.size()
            << " interactions, "
            << fmt6(100.0 * static_cast<double>(negatives) /
                    static_cast<double>(result.log.records.size()))
            << "% negative (threshold " << kSynthThreshold << ")\n"
            << "wrote " << (dir / "interactions.tsv").string() << "\n";
  return 0;
}

// ---- prepare ----

struct PrepareOpts {
  std::string input;
  double threshold = 0;
  int max_len = 50;
  double train_fraction = 0.9;
  int k_core = 5;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int run_prepare(const PrepareOpts& o) {
  const fs::path dir = resolve_out_dir(o.out_dir, o.seed);
  const InteractionLog raw = load_interactions(o.input);
  const InteractionLog filtered = kcore_filter(raw, o.k_core);
  const LabeledLog labeled = assign_feedback(filtered, o.threshold);
  const SplitBundle bundle = temporal_split(labeled, o.train_fraction, o.seed);

  SplitMeta meta;
  meta.boundary_ts = bundle.boundary_ts;
  meta.threshold = o.threshold;
  meta.max_len = o.max_len;
  meta.num_users = labeled.log.num_users();
  meta.num_items = labeled.log.num_items();
  meta.seed = o.seed;
  write_split(dir, bundle, meta);

  KvFile m;
  manifest_common(m, "prepare");
  m.set("input", o.input);
  m.set("input_digest", file_digest(o.input));
  m.set("threshold", o.threshold);
  m.set("max_len", static_cast<std::int64_t>(o.max_len));
  m.set("train_fraction", o.train_fraction);
  m.set("k_core", static_cast<std::int64_t>(o.k_core));
  m.set("seed", o.seed);
  m.set("artifact.train", std::string("train.tsv"));
  m.set("artifact.val", std::string("val.tsv"));
  m.set("artifact.test", std::string("test.tsv"));
  m.set("artifact.meta", std::string("meta.txt"));
  m.write(dir / "manifest.txt");

  std::size_t negatives = 0;
  for (std::uint8_t p : labeled.positive) {
    if (!p) ++negatives;
  }
  const double actions = static_cast<double>(labeled.log.records.size());
  std::cout << "users=" << labeled.log.num_users() << " items=" << labeled.log.num_items()
            << " actions=" << labeled.log.records.size() << "\n"
            << "feedback_threshold=" << o.threshold
            << " negative_share=" << fmt6(100.0 * static_cast<double>(negatives) / actions)
            << "%\n"
            << "avg_actions_per_user="
            << fmt6(actions / static_cast<double>(labeled.log.num_users()))
            << " density="
            << fmt6(100.0 * actions /
                    (static_cast<double>(labeled.log.num_users()) *
                     static_cast<double>(labeled.log.num_items())))
            << "%\n"
            << "boundary_timestamp=" << bundle.boundary_ts << " val_users=" << bundle.val.size()
            << " test_users=" << bundle.test.size() << "\n"
            << "wrote split to " << dir.string() << "\n";
  return 0;
}

// ---- train ----

struct TrainOpts {
  std::string input;
  std::string variant;
  double alpha = 0;
  double beta = 0;
  bool alpha_given = false;
  bool beta_given = false;
  CommonModelOpts model;
  std::string out_dir;
};

struct VariantSpec {
  ModelVariant variant;
  bool allows_alpha = false;
  bool allows_beta = false;
};

VariantSpec parse_variant(const std::string& name) {
  if (name == "pnfrec") return {ModelVariant::pnfrec, true, true};
  if (name == "pnfrec_pn") return {ModelVariant::pnfrec, true, false};
  if (name == "pnfrec_pc") return {ModelVariant::pnfrec, false, true};
  if (name == "sasrec_p") return {ModelVariant::sasrec_p, false, false};
  if (name == "sasrec") return {ModelVariant::sasrec, false, false};
  if (name == "sasrec_c") return {ModelVariant::sasrec_c, false, true};
  throw ConfigError("unknown variant '" + name +
                    "' (expected pnfrec, pnfrec_pn, pnfrec_pc, sasrec_p, sasrec, sasrec_c)");
}

LossWeights resolve_weights(const TrainOpts& o, const VariantSpec& spec) {
  if (o.alpha_given && !spec.allows_alpha) {
    throw ConfigError("--alpha has no meaning for variant " + o.variant);
  }
  if (o.beta_given && !spec.allows_beta) {
    throw ConfigError("--beta has no meaning for variant " + o.variant);
  }
  LossWeights w;
  w.alpha = spec.allows_alpha ? o.alpha : 0.0;
  w.beta = spec.allows_beta ? o.beta : 0.0;
  return w;
}

void write_training_log(const fs::path& path, const std::vector<EpochLog>& log,
                        std::size_t eval_k) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch\tL\tL_ce_p\tL_ce_n\tL_c\tval_ndcg_p@" << eval_k << "\twall_clock_s\n";
  for (const EpochLog& e : log) {
    out << e.epoch << '\t' << fmt6(e.total) << '\t' << fmt6(e.ce_pos) << '\t'
        << fmt6(e.ce_neg) << '\t' << fmt6(e.contrastive) << '\t' << fmt6(e.val_metric)
        << '\t' << fmt6(e.wall_seconds) << '\n';
  }
}

int run_train(const TrainOpts& o) {
  const VariantSpec spec = parse_variant(o.variant);
  const LossWeights weights = resolve_weights(o, spec);
  const fs::path dir = resolve_out_dir(o.out_dir, o.model.seed);

  auto [bundle, meta] = read_split(o.input);
  TrainConfig cfg = make_train_config(o.model, meta);
  cfg.variant = spec.variant;
  cfg.weights = weights;

  KvFile m;
  manifest_common(m, "train");
  m.set("input", o.input);
  m.set("input_digest.train", file_digest(fs::path(o.input) / "train.tsv"));
  m.set("input_digest.val", file_digest(fs::path(o.input) / "val.tsv"));
  m.set("input_digest.test", file_digest(fs::path(o.input) / "test.tsv"));
  m.set("variant", o.variant);
  m.set("alpha", weights.alpha);
  m.set("beta", weights.beta);
  manifest_model_opts(m, o.model, cfg);
  m.set("artifact.checkpoint", std::string("checkpoint.pnfr"));
  m.set("artifact.training_log", std::string("training_log.tsv"));
  m.write(dir / "manifest.txt");

  const TrainResult<float> result = train<float>(bundle, cfg, [&](const EpochLog& e) {
    std::cout << "epoch " << e.epoch << "  L=" << fmt6(e.total) << "  L_ce_p=" << fmt6(e.ce_pos)
              << "  L_ce_n=" << fmt6(e.ce_neg) << "  L_c=" << fmt6(e.contrastive)
              << "  val_ndcg_p@" << cfg.eval_k << "=" << fmt6(e.val_metric) << "\n";
  });

  save_checkpoint(dir / "checkpoint.pnfr", result.params);
  write_training_log(dir / "training_log.tsv", result.log, cfg.eval_k);
  std::cout << "best epoch " << result.best_epoch << " with val_ndcg_p@" << cfg.eval_k << "="
            << fmt6(result.best_metric) << "\n"
            << "wrote " << (dir / "checkpoint.pnfr").string() << "\n";
  return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
  std::string input;
  std::string checkpoint;
  std::vector<std::size_t> ks{10};
  std::string split = "test";
  bool filter_seen = true;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int run_evaluate(const EvaluateOpts& o) {
  if (o.ks.empty()) throw ConfigError("evaluate: need at least one k");
  for (std::size_t k : o.ks) {
    if (k == 0) throw ConfigError("evaluate: k must be >= 1");
  }
  if (o.split != "test" && o.split != "val") {
    throw ConfigError("evaluate: --split must be 'test' or 'val'");
  }
  const fs::path dir = resolve_out_dir(o.out_dir, o.seed);
  auto [bundle, meta] = read_split(o.input);
  const ModelParams<float> model = load_checkpoint(o.checkpoint);
  if (model.num_items != meta.num_items) {
    throw DataError("evaluate: checkpoint has " + std::to_string(model.num_items) +
                    " items but split has " + std::to_string(meta.num_items));
  }
  const std::vector<EvalCase>& cases = o.split == "test" ? bundle.test : bundle.val;
  if (cases.empty()) throw EvalError("evaluate: no users in " + o.split + " split");

  const std::size_t max_k = *std::max_element(o.ks.begin(), o.ks.end());
  const std::vector<RankedCase> ranked = rank_cases(model, cases, max_k, o.filter_seen);
  std::vector<EvalReport> reports;
  for (std::size_t k : o.ks) reports.push_back(split_eval(ranked, k));

  KvFile m;
  manifest_common(m, "evaluate");
  m.set("input", o.input);
  m.set("input_digest.train", file_digest(fs::path(o.input) / "train.tsv"));
  m.set("input_digest.val", file_digest(fs::path(o.input) / "val.tsv"));
  m.set("input_digest.test", file_digest(fs::path(o.input) / "test.tsv"));
  m.set("checkpoint", o.checkpoint);
  m.set("checkpoint_digest", file_digest(o.checkpoint));
  m.set("split", o.split);
  {
    std::string klist;
    for (std::size_t k : o.ks) {
      if (!klist.empty()) klist += ',';
      klist += std::to_string(k);
    }
    m.set("k", klist);
  }
  m.set("filter_seen", std::string(o.filter_seen ? "true" : "false"));
  m.set("artifact.report_txt", std::string("report.txt"));
  m.set("artifact.report_tsv", std::string("report.tsv"));
  m.write(dir / "manifest.txt");

  const std::string table = format_report_table(reports);
  {
    std::ofstream out(dir / "report.txt");
    if (!out) throw IoError("cannot write report.txt");
    out << table;
  }
  {
    std::ofstream out(dir / "report.tsv");
    if (!out) throw IoError("cannot write report.tsv");
    out << "metric\tvalue\tgroup_size\n";
    for (const EvalReport& r : reports) {
      for (const ReportLine& line : report_lines(r)) {
        out << line.metric << '\t' << fmt6(line.value) << '\t' << line.group_size << '\n';
      }
    }
  }
  std::cout << table << "wrote " << (dir / "report.tsv").string() << "\n";
  return 0;
}

// ---- tune ----

struct TuneOpts {
  std::string input;
  std::vector<double> alphas;
  std::vector<double> betas;
  int jobs = 1;
  CommonModelOpts model;
  std::string out_dir;
};

int run_tune(const TuneOpts& o) {
  const fs::path dir = resolve_out_dir(o.out_dir, o.model.seed);
  auto [bundle, meta] = read_split(o.input);
  TrainConfig cfg = make_train_config(o.model, meta);
  cfg.variant = ModelVariant::pnfrec;

  // Either grid defaults to the full {0, 0.05, ..., 1} range.
  TuneGrid grid;
  grid.alpha_values = o.alphas;
  grid.beta_values = o.betas;
  for (int i = 0; i <= 20; ++i) {
    const double v = 0.05 * i;
    if (o.alphas.empty()) grid.alpha_values.push_back(v);
    if (o.betas.empty()) grid.beta_values.push_back(v);
  }

  KvFile m;
  manifest_common(m, "tune");
  m.set("input", o.input);
  m.set("input_digest.train", file_digest(fs::path(o.input) / "train.tsv"));
  m.set("input_digest.val", file_digest(fs::path(o.input) / "val.tsv"));
  m.set("input_digest.test", file_digest(fs::path(o.input) / "test.tsv"));
  manifest_model_opts(m, o.model, cfg);
  m.set("jobs", static_cast<std::int64_t>(o.jobs));
  m.set("artifact.sweep", std::string("sweep.tsv"));
  m.set("artifact.best", std::string("best.txt"));
  m.set("artifact.best_checkpoint", std::string("best_checkpoint.pnfr"));
  m.write(dir / "manifest.txt");

  const auto start = std::chrono::steady_clock::now();
  const TuneResult<float> result = tune_incremental<float>(bundle, cfg, grid, o.jobs);
  const auto elapsed = [&start]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  {
    std::ofstream out(dir / "sweep.tsv");
    if (!out) throw IoError("cannot write sweep.tsv");
    out << "phase\talpha\tbeta\tseed\tval_ndcg_p@" << cfg.eval_k
        << "\tbest_epoch\twall_clock_s\n";
    for (const SweepRow& row : result.rows) {
      out << row.phase << '\t' << fmt6(row.alpha) << '\t' << fmt6(row.beta) << '\t'
          << row.seed << '\t' << fmt6(row.val_metric) << '\t' << row.best_epoch << '\t'
          << fmt6(elapsed()) << '\n';
    }
  }
  {
    KvFile best;
    best.set("best_alpha", result.best_alpha);
    best.set("best_beta", result.best_beta);
    best.set("val_metric", result.best.best_metric);
    best.set("best_epoch", static_cast<std::int64_t>(result.best.best_epoch));
    best.write(dir / "best.txt");
  }
  save_checkpoint(dir / "best_checkpoint.pnfr", result.best.params);

  std::cout << "best alpha=" << fmt6(result.best_alpha) << " beta=" << fmt6(result.best_beta)
            << " val_ndcg_p@" << cfg.eval_k << "=" << fmt6(result.best.best_metric) << "\n"
            << "wrote " << (dir / "sweep.tsv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pnfrec: sequential recommendation from positive and negative feedback"};
  app.require_subcommand(1);
  // Plain key=value text with a [subcommand] section (or dotted keys like
  // train.lr). Explicit flags override config values, which override the
  // built-in defaults.
  app.set_config("--config");

  SynthOpts synth_opts;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic interaction log");
  synth_cmd->add_option("--users", synth_opts.cfg.n_users, "Number of users");
  synth_cmd->add_option("--items", synth_opts.cfg.n_items, "Number of items");
  synth_cmd->add_option("--clusters", synth_opts.cfg.n_clusters, "Number of item clusters");
  synth_cmd->add_option("--per-user", synth_opts.cfg.interactions_per_user,
                        "Interactions per user");
  synth_cmd->add_option("--like-in", synth_opts.cfg.like_prob_in_cluster,
                        "Like probability inside the preferred cluster");
  synth_cmd->add_option("--like-off", synth_opts.cfg.like_prob_off_cluster,
                        "Like probability outside the preferred cluster");
  synth_cmd->add_option("--stickiness", synth_opts.cfg.markov_stickiness,
                        "Cluster walk stickiness");
  synth_cmd->add_option("--seed", synth_opts.cfg.seed, "Random seed");
  synth_cmd->add_option("--out-dir", synth_opts.out_dir, "Run directory")
      ->envname("PNFREC_OUT_DIR");

  PrepareOpts prep_opts;
  CLI::App* prep_cmd =
      app.add_subcommand("prepare", "Filter, label and split an interaction log");
  prep_cmd->add_option("--input", prep_opts.input, "Interaction file")
      ->required()
      ->check(CLI::ExistingFile);
  prep_cmd->add_option("--threshold", prep_opts.threshold,
                       "Feedback threshold: value >= threshold is positive")
      ->required();
  prep_cmd->add_option("--max-len", prep_opts.max_len, "Maximum sequence length l")
      ->check(CLI::PositiveNumber);
  prep_cmd->add_option("--train-fraction", prep_opts.train_fraction,
                       "Share of interactions before the temporal boundary");
  prep_cmd->add_option("--k-core", prep_opts.k_core, "k-core filtering threshold")
      ->check(CLI::PositiveNumber);
  prep_cmd->add_option("--seed", prep_opts.seed, "Validation/test assignment seed");
  prep_cmd->add_option("--out-dir", prep_opts.out_dir, "Run directory")
      ->envname("PNFREC_OUT_DIR");

  TrainOpts train_opts;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on a prepared split");
  train_cmd->add_option("--input", train_opts.input, "Prepared split directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd
      ->add_option("--variant", train_opts.variant,
                   "pnfrec | pnfrec_pn | pnfrec_pc | sasrec_p | sasrec | sasrec_c")
      ->required();
  CLI::Option* alpha_opt =
      train_cmd->add_option("--alpha", train_opts.alpha, "Negative CE weight");
  CLI::Option* beta_opt =
      train_cmd->add_option("--beta", train_opts.beta, "Contrastive weight");
  add_model_options(train_cmd, train_opts.model);
  train_cmd->add_option("--out-dir", train_opts.out_dir, "Run directory")
      ->envname("PNFREC_OUT_DIR");
  train_cmd->callback([&]() {
    train_opts.alpha_given = alpha_opt->count() > 0;
    train_opts.beta_given = beta_opt->count() > 0;
  });

  EvaluateOpts eval_opts;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Evaluate a checkpoint with polarity-split metrics");
  eval_cmd->add_option("--input", eval_opts.input, "Prepared split directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--k", eval_opts.ks, "Cutoffs to report");
  eval_cmd->add_option("--split", eval_opts.split, "Which split to evaluate (test|val)");
  eval_cmd->add_flag("--filter-seen,!--no-filter-seen", eval_opts.filter_seen,
                     "Drop already-seen items from recommendations (default on)");
  eval_cmd->add_option("--seed", eval_opts.seed, "Seed recorded for the run directory name");
  eval_cmd->add_option("--out-dir", eval_opts.out_dir, "Run directory")
      ->envname("PNFREC_OUT_DIR");

  TuneOpts tune_opts;
  CLI::App* tune_cmd =
      app.add_subcommand("tune", "Incremental (alpha, beta) grid search for pnfrec");
  tune_cmd->add_option("--input", tune_opts.input, "Prepared split directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  tune_cmd->add_option("--alphas", tune_opts.alphas,
                       "Alpha grid (default 0, 0.05, ..., 1)");
  tune_cmd->add_option("--betas", tune_opts.betas, "Beta grid (default 0, 0.05, ..., 1)");
  tune_cmd->add_option("--jobs", tune_opts.jobs, "Parallel training runs")
      ->check(CLI::PositiveNumber);
  add_model_options(tune_cmd, tune_opts.model);
  tune_cmd->add_option("--out-dir", tune_opts.out_dir, "Run directory")
      ->envname("PNFREC_OUT_DIR");

  try {
    app.parse(argc, argv);
    if (synth_cmd->parsed()) return run_synth(synth_opts);
    if (prep_cmd->parsed()) return run_prepare(prep_opts);
    if (train_cmd->parsed()) return run_train(train_opts);
    if (eval_cmd->parsed()) return run_evaluate(eval_opts);
    if (tune_cmd->parsed()) return run_tune(tune_opts);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
