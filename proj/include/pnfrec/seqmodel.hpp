#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pnfrec/dataio.hpp"
#include "pnfrec/errors.hpp"
#include "pnfrec/graph.hpp"
#include "pnfrec/rng.hpp"
#include "pnfrec/tensor.hpp"

namespace pnfrec {

// pnfrec: two encoders over the positive / negative subsequences.
// sasrec_p: one encoder over the positive subsequence.
// sasrec: one encoder over the full interleaved sequence.
// sasrec_c: sasrec plus a contrastive term at positive positions.
enum class ModelVariant { pnfrec = 0, sasrec_p = 1, sasrec = 2, sasrec_c = 3 };

inline const char* variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::pnfrec: return "pnfrec";
    case ModelVariant::sasrec_p: return "sasrec_p";
    case ModelVariant::sasrec: return "sasrec";
    case ModelVariant::sasrec_c: return "sasrec_c";
  }
  return "?";
}

inline bool variant_has_negative_encoder(ModelVariant v) {
  return v == ModelVariant::pnfrec;
}

inline bool variant_uses_full_sequence(ModelVariant v) {
  return v == ModelVariant::sasrec || v == ModelVariant::sasrec_c;
}

inline bool variant_has_contrastive(ModelVariant v) {
  return v == ModelVariant::pnfrec || v == ModelVariant::sasrec_c;
}

struct EncoderConfig {
  int dim = 64;
  int num_blocks = 2;
  int num_heads = 1;
  int max_len = 50;
  double dropout = 0.2;

  void validate() const {
    if (dim < 1) throw ConfigError("encoder: dim must be >= 1");
    if (num_blocks < 0) throw ConfigError("encoder: num_blocks must be >= 0");
    if (num_heads < 1) throw ConfigError("encoder: num_heads must be >= 1");
    if (dim % num_heads != 0) {
      throw ConfigError("encoder: dim " + std::to_string(dim) +
                        " not divisible by num_heads " + std::to_string(num_heads));
    }
    if (max_len < 1) throw ConfigError("encoder: max_len must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ConfigError("encoder: dropout must lie in [0, 1)");
    }
  }
};

template <typename Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
};

template <typename Real>
struct BlockParams {
  Parameter<Real> wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter<Real> ln1_gamma, ln1_beta;
  Parameter<Real> ff1_w, ff1_b, ff2_w, ff2_b;
  Parameter<Real> ln2_gamma, ln2_beta;
};

template <typename Real>
struct EncoderParams {
  Parameter<Real> pos_table;  // max_len x dim positional embeddings
  std::vector<BlockParams<Real>> blocks;
};

// Shared item embedding table plus one or two encoder stacks. Row 0 of the
// item table is the padding row: never a loss target, masked in attention.
template <typename Real>
struct ModelParams {
  ModelVariant variant = ModelVariant::pnfrec;
  EncoderConfig config;
  int num_items = 0;

  Parameter<Real> item_table;  // (num_items + 1) x dim
  EncoderParams<Real> primary;
  std::optional<EncoderParams<Real>> negative;

  std::vector<Parameter<Real>*> all() {
    std::vector<Parameter<Real>*> out;
    out.push_back(&item_table);
    const auto add_encoder = [&out](EncoderParams<Real>& e) {
      out.push_back(&e.pos_table);
      for (BlockParams<Real>& b : e.blocks) {
        for (Parameter<Real>* p : {&b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo, &b.bo,
                                   &b.ln1_gamma, &b.ln1_beta, &b.ff1_w, &b.ff1_b, &b.ff2_w,
                                   &b.ff2_b, &b.ln2_gamma, &b.ln2_beta}) {
          out.push_back(p);
        }
      }
    };
    add_encoder(primary);
    if (negative) add_encoder(*negative);
    return out;
  }

  std::vector<const Parameter<Real>*> all() const {
    auto vars = const_cast<ModelParams*>(this)->all();
    return {vars.begin(), vars.end()};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Parameter<Real>* p : all()) n += p->value.size();
    return n;
  }

  // Closed form: (N+1)*d for the table plus, per encoder,
  // l*d positional entries and num_blocks * (6*d^2 + 10*d) block weights
  // (QKVO projections with biases, two layer norms, two d->d affine
  // feed-forward layers).
  static std::size_t expected_parameter_count(const EncoderConfig& cfg, int num_items,
                                              ModelVariant variant) {
    const std::size_t d = static_cast<std::size_t>(cfg.dim);
    const std::size_t l = static_cast<std::size_t>(cfg.max_len);
    const std::size_t blocks = static_cast<std::size_t>(cfg.num_blocks);
    const std::size_t per_encoder = l * d + blocks * (6 * d * d + 10 * d);
    const std::size_t encoders = variant_has_negative_encoder(variant) ? 2 : 1;
    return (static_cast<std::size_t>(num_items) + 1) * d + encoders * per_encoder;
  }

  static ModelParams init(ModelVariant variant, const EncoderConfig& cfg, int num_items,
                          std::uint64_t seed) {
    cfg.validate();
    if (num_items < 1) throw ConfigError("model: need at least one item");
    ModelParams m;
    m.variant = variant;
    m.config = cfg;
    m.num_items = num_items;
    const std::size_t d = static_cast<std::size_t>(cfg.dim);

    const auto normal_init = [seed](const std::string& name, std::vector<std::size_t> shape,
                                    double sd) {
      Rng rng = Rng::derive(seed, "init/" + name);
      Tensor<Real> t(std::move(shape));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(rng.normal(0.0, sd));
      return Parameter<Real>{name, std::move(t)};
    };
    const auto xavier_init = [seed](const std::string& name, std::size_t fan_in,
                                    std::size_t fan_out) {
      Rng rng = Rng::derive(seed, "init/" + name);
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      Tensor<Real> t({fan_in, fan_out});
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<Real>((rng.uniform() * 2.0 - 1.0) * limit);
      }
      return Parameter<Real>{name, std::move(t)};
    };
    const auto const_init = [](const std::string& name, std::vector<std::size_t> shape,
                               Real v) {
      Tensor<Real> t(std::move(shape));
      t.fill(v);
      return Parameter<Real>{name, std::move(t)};
    };

    m.item_table = normal_init("item_table", {static_cast<std::size_t>(num_items) + 1, d}, 0.02);
    for (std::size_t j = 0; j < d; ++j) m.item_table.value(0, j) = Real(0);  // padding row

    const auto make_encoder = [&](const std::string& prefix) {
      EncoderParams<Real> enc;
      enc.pos_table =
          normal_init(prefix + "/pos_table", {static_cast<std::size_t>(cfg.max_len), d}, 0.02);
      enc.blocks.resize(static_cast<std::size_t>(cfg.num_blocks));
      for (int bi = 0; bi < cfg.num_blocks; ++bi) {
        const std::string bp = prefix + "/block" + std::to_string(bi) + "/";
        BlockParams<Real>& b = enc.blocks[static_cast<std::size_t>(bi)];
        b.wq = xavier_init(bp + "wq", d, d);
        b.bq = const_init(bp + "bq", {d}, Real(0));
        b.wk = xavier_init(bp + "wk", d, d);
        b.bk = const_init(bp + "bk", {d}, Real(0));
        b.wv = xavier_init(bp + "wv", d, d);
        b.bv = const_init(bp + "bv", {d}, Real(0));
        b.wo = xavier_init(bp + "wo", d, d);
        b.bo = const_init(bp + "bo", {d}, Real(0));
        b.ln1_gamma = const_init(bp + "ln1_gamma", {d}, Real(1));
        b.ln1_beta = const_init(bp + "ln1_beta", {d}, Real(0));
        b.ff1_w = xavier_init(bp + "ff1_w", d, d);
        b.ff1_b = const_init(bp + "ff1_b", {d}, Real(0));
        b.ff2_w = xavier_init(bp + "ff2_w", d, d);
        b.ff2_b = const_init(bp + "ff2_b", {d}, Real(0));
        b.ln2_gamma = const_init(bp + "ln2_gamma", {d}, Real(1));
        b.ln2_beta = const_init(bp + "ln2_beta", {d}, Real(0));
      }
      return enc;
    };

    m.primary = make_encoder("pos");
    if (variant_has_negative_encoder(variant)) m.negative = make_encoder("neg");
    return m;
  }
};

// One graph leaf per parameter tensor per tape, so the shared item table
// accumulates gradients from every branch into a single node.
template <typename Real>
class GraphBinding {
 public:
  using Var = typename ad::Graph<Real>::Var;

  explicit GraphBinding(ad::Graph<Real>& g) : graph_(&g) {}

  Var bind(const Parameter<Real>& p) {
    auto it = map_.find(&p);
    if (it != map_.end()) return it->second;
    const Var v = graph_->leaf(p.value);
    map_.emplace(&p, v);
    return v;
  }

  std::optional<Var> find(const Parameter<Real>& p) const {
    auto it = map_.find(&p);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

 private:
  ad::Graph<Real>* graph_;
  std::unordered_map<const Parameter<Real>*, Var> map_;
};

// Left-pads (recent items rightmost) and shifts item ids to table rows
// (item i -> row i + 1; row 0 is padding). Longer histories keep the most
// recent max_len items.
inline std::vector<int> pad_left(std::span<const int> items, int max_len) {
  const std::size_t l = static_cast<std::size_t>(max_len);
  const std::size_t m = std::min(items.size(), l);
  std::vector<int> rows(l, 0);
  for (std::size_t i = 0; i < m; ++i) {
    rows[l - m + i] = items[items.size() - m + i] + 1;
  }
  return rows;
}

// Causal transformer encoder over one padded sequence of table rows.
// Layout per block: causal multi-head self-attention, residual + layer
// norm, position-wise feed-forward, residual + layer norm. Attention can
// reach neither future positions nor padding.
template <typename Real>
typename ad::Graph<Real>::Var encode(ad::Graph<Real>& g, GraphBinding<Real>& bind,
                                     const std::vector<int>& padded_rows,
                                     const EncoderParams<Real>& enc,
                                     typename ad::Graph<Real>::Var item_table_var,
                                     const EncoderConfig& cfg, bool train_mode,
                                     Rng* dropout_rng) {
  using Var = typename ad::Graph<Real>::Var;
  const std::size_t l = static_cast<std::size_t>(cfg.max_len);
  const std::size_t d = static_cast<std::size_t>(cfg.dim);
  if (padded_rows.size() != l) {
    throw DimensionError("encode: sequence length " + std::to_string(padded_rows.size()) +
                         " does not match configured max_len " + std::to_string(cfg.max_len));
  }
  const double rate = train_mode ? cfg.dropout : 0.0;
  if (rate > 0.0 && dropout_rng == nullptr) {
    throw Error("encode: training with dropout needs a dropout stream");
  }
  const auto drop = [&](Var v) {
    return rate > 0.0 ? g.dropout(v, rate, *dropout_rng) : v;
  };

  Var x = g.add(g.gather_rows(item_table_var, padded_rows), bind.bind(enc.pos_table));
  x = drop(x);

  if (cfg.num_blocks == 0) return x;

  // Queries may reach earlier non-padding keys plus themselves; the self
  // entry keeps padding rows causal instead of degenerating to a uniform
  // softmax over the whole (fully masked) row.
  Tensor<Real> mask({l, l});
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t s = 0; s < l; ++s) {
      const bool allowed = s == t || (s < t && padded_rows[s] != 0);
      mask(t, s) = allowed ? Real(0) : Real(-1e9);
    }
  }
  const Var mask_var = g.constant(std::move(mask));
  const Real attn_scale =
      Real(1) / std::sqrt(static_cast<Real>(d / static_cast<std::size_t>(cfg.num_heads)));

  for (const BlockParams<Real>& b : enc.blocks) {
    const Var q = g.add_rowvec(g.matmul(x, bind.bind(b.wq)), bind.bind(b.bq));
    const Var k = g.add_rowvec(g.matmul(x, bind.bind(b.wk)), bind.bind(b.bk));
    const Var v = g.add_rowvec(g.matmul(x, bind.bind(b.wv)), bind.bind(b.bv));

    Var attn_out{};
    if (cfg.num_heads == 1) {
      const Var scores = g.add(g.scale(g.matmul_nt(q, k), attn_scale), mask_var);
      const Var weights = drop(g.softmax_rows(scores));
      attn_out = g.matmul(weights, v);
    } else {
      const std::size_t dh = d / static_cast<std::size_t>(cfg.num_heads);
      std::vector<Var> heads;
      heads.reserve(static_cast<std::size_t>(cfg.num_heads));
      for (int h = 0; h < cfg.num_heads; ++h) {
        const std::size_t c0 = static_cast<std::size_t>(h) * dh;
        const Var qh = g.slice_cols(q, c0, c0 + dh);
        const Var kh = g.slice_cols(k, c0, c0 + dh);
        const Var vh = g.slice_cols(v, c0, c0 + dh);
        const Var scores = g.add(g.scale(g.matmul_nt(qh, kh), attn_scale), mask_var);
        const Var weights = drop(g.softmax_rows(scores));
        heads.push_back(g.matmul(weights, vh));
      }
      attn_out = g.concat_cols(heads);
    }
    attn_out = drop(g.add_rowvec(g.matmul(attn_out, bind.bind(b.wo)), bind.bind(b.bo)));
    x = g.layer_norm(g.add(x, attn_out), bind.bind(b.ln1_gamma), bind.bind(b.ln1_beta));

    Var ff = g.relu(g.add_rowvec(g.matmul(x, bind.bind(b.ff1_w)), bind.bind(b.ff1_b)));
    ff = drop(g.add_rowvec(g.matmul(ff, bind.bind(b.ff2_w)), bind.bind(b.ff2_b)));
    x = g.layer_norm(g.add(x, ff), bind.bind(b.ln2_gamma), bind.bind(b.ln2_beta));
  }
  return x;
}

// Logits over real items for one hidden state: logits[i] = <hidden, E[i+1]>.
// The padding row is excluded by construction.
template <typename Real>
std::vector<Real> score_items(std::span<const Real> hidden, const Tensor<Real>& item_table) {
  const std::size_t d = item_table.cols();
  if (hidden.size() != d) {
    throw DimensionError("score_items: hidden size " + std::to_string(hidden.size()) +
                         " vs embedding dim " + std::to_string(d));
  }
  const std::size_t n = item_table.rows() - 1;
  std::vector<Real> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = lin::dot(hidden.data(), item_table.row(i + 1), d);
  }
  return logits;
}

// Training-time forward over a batch of users. Rows of the returned logit
// matrices correspond to (user, position) pairs with a successor in the
// respective sequence; positions without a successor are masked out here
// and never reach a loss.
template <typename Real>
struct ForwardBatch {
  using Var = typename ad::Graph<Real>::Var;

  Var item_table_var{};  // leaf for the shared table
  Var items_var{};       // rows 1..N of the table (scoring matrix)

  std::optional<Var> main_hidden;  // (sum of valid positions) x d
  std::optional<Var> main_logits;  // same rows x N
  std::vector<int> main_targets;

  std::optional<Var> neg_logits;
  std::vector<int> neg_targets;

  // Contrastive inputs: hidden rows at contributing positions, the next
  // positive item per row, and per-user row spans with that user's
  // negative items.
  std::optional<Var> contr_hidden;
  std::vector<int> contr_targets;
  std::vector<std::pair<std::size_t, std::size_t>> contr_spans;
  std::vector<std::vector<int>> contr_neg_items;
};

template <typename Real>
ForwardBatch<Real> forward_batch(ad::Graph<Real>& g, GraphBinding<Real>& bind,
                                 const ModelParams<Real>& model, const UserSequences& seqs,
                                 std::span<const int> users, bool train_mode, Rng* pos_rng,
                                 Rng* neg_rng) {
  using Var = typename ad::Graph<Real>::Var;
  const EncoderConfig& cfg = model.config;
  const std::size_t l = static_cast<std::size_t>(cfg.max_len);

  ForwardBatch<Real> fb;
  fb.item_table_var = bind.bind(model.item_table);

  std::vector<Var> main_parts, neg_parts, contr_parts;
  std::size_t contr_rows = 0;

  for (int user : users) {
    const auto u = static_cast<std::size_t>(user);
    const std::vector<int>& full = seqs.full[u];
    const std::vector<int>& sp = seqs.pos[u];
    const std::vector<int>& sn = seqs.neg[u];

    if (!variant_uses_full_sequence(model.variant)) {
      // Positive encoder over S^p.
      if (sp.size() >= 2) {
        const std::vector<int> padded = pad_left(sp, cfg.max_len);
        const Var h = encode(g, bind, padded, model.primary, fb.item_table_var, cfg,
                             train_mode, pos_rng);
        const std::size_t m = sp.size();
        std::vector<int> rows(m - 1);
        for (std::size_t i = 0; i + 1 < m; ++i) rows[i] = static_cast<int>(l - m + i);
        main_parts.push_back(g.gather_rows(h, rows));
        for (std::size_t i = 1; i < m; ++i) fb.main_targets.push_back(sp[i]);
        if (variant_has_contrastive(model.variant) && !sn.empty()) {
          fb.contr_spans.emplace_back(contr_rows, contr_rows + (m - 1));
          fb.contr_neg_items.push_back(sn);
        }
        contr_rows += m - 1;  // pnfrec contrastive rows coincide with CE rows
      }
    } else {
      // Single encoder over the interleaved sequence (last max_len items).
      const std::size_t m = std::min(full.size(), l);
      if (m >= 2) {
        const std::vector<int> padded = pad_left(full, cfg.max_len);
        const Var h = encode(g, bind, padded, model.primary, fb.item_table_var, cfg,
                             train_mode, pos_rng);
        std::vector<int> rows(m - 1);
        const std::size_t off = full.size() - m;  // window start in full history
        for (std::size_t i = 0; i + 1 < m; ++i) rows[i] = static_cast<int>(l - m + i);
        main_parts.push_back(g.gather_rows(h, rows));
        for (std::size_t i = 1; i < m; ++i) fb.main_targets.push_back(full[off + i]);

        if (model.variant == ModelVariant::sasrec_c) {
          // Contrastive rows: positive positions whose next positive item
          // is still inside the window.
          std::vector<int> crow_idx;
          std::vector<int> ctargets;
          for (std::size_t i = 0; i + 1 < m; ++i) {
            if (!seqs.full_pos[u][off + i]) continue;
            for (std::size_t j = i + 1; j < m; ++j) {
              if (seqs.full_pos[u][off + j]) {
                crow_idx.push_back(static_cast<int>(l - m + i));
                ctargets.push_back(full[off + j]);
                break;
              }
            }
          }
          if (!crow_idx.empty() && !sn.empty()) {
            contr_parts.push_back(g.gather_rows(h, crow_idx));
            fb.contr_spans.emplace_back(contr_rows, contr_rows + crow_idx.size());
            fb.contr_neg_items.push_back(sn);
            fb.contr_targets.insert(fb.contr_targets.end(), ctargets.begin(), ctargets.end());
            contr_rows += crow_idx.size();
          }
        }
      }
    }

    if (variant_has_negative_encoder(model.variant) && sn.size() >= 2) {
      const std::vector<int> padded = pad_left(sn, cfg.max_len);
      const Var h = encode(g, bind, padded, *model.negative, fb.item_table_var, cfg,
                           train_mode, neg_rng);
      const std::size_t m = sn.size();
      std::vector<int> rows(m - 1);
      for (std::size_t i = 0; i + 1 < m; ++i) rows[i] = static_cast<int>(l - m + i);
      neg_parts.push_back(g.gather_rows(h, rows));
      for (std::size_t i = 1; i < m; ++i) fb.neg_targets.push_back(sn[i]);
    }
  }

  std::vector<int> item_rows(static_cast<std::size_t>(model.num_items));
  for (int i = 0; i < model.num_items; ++i) item_rows[static_cast<std::size_t>(i)] = i + 1;
  fb.items_var = g.gather_rows(fb.item_table_var, item_rows);

  if (!main_parts.empty()) {
    fb.main_hidden = g.concat_rows(main_parts);
    fb.main_logits = g.matmul_nt(*fb.main_hidden, fb.items_var);
    if (variant_has_contrastive(model.variant) &&
        !variant_uses_full_sequence(model.variant)) {
      fb.contr_hidden = fb.main_hidden;
      fb.contr_targets = fb.main_targets;
    }
  }
  if (!neg_parts.empty()) {
    fb.neg_logits = g.matmul_nt(g.concat_rows(neg_parts), fb.items_var);
  }
  if (!contr_parts.empty()) {
    fb.contr_hidden = g.concat_rows(contr_parts);
  }
  return fb;
}

// Top-k recommendation from the final non-padding position. When
// filter_seen is set, every item of `seen_items` is removed from the
// candidate set before ranking. Ties break toward the smaller item index.
template <typename Real>
std::vector<int> predict_topk(const ModelParams<Real>& model, std::span<const int> input_items,
                              std::span<const int> seen_items, std::size_t k,
                              bool filter_seen) {
  if (k == 0) throw ConfigError("predict_topk: k must be >= 1");
  if (input_items.empty()) {
    throw InferenceError("predict_topk: empty input history");
  }
  ad::Graph<Real> g;
  GraphBinding<Real> bind(g);
  const std::vector<int> padded = pad_left(input_items, model.config.max_len);
  const auto table_var = bind.bind(model.item_table);
  const auto h = encode(g, bind, padded, model.primary, table_var, model.config,
                        /*train_mode=*/false, nullptr);
  const Tensor<Real>& hidden = g.value(h);
  const std::size_t last = static_cast<std::size_t>(model.config.max_len) - 1;
  const std::vector<Real> logits =
      score_items(std::span<const Real>(hidden.row(last), hidden.cols()), model.item_table.value);

  std::vector<char> excluded(static_cast<std::size_t>(model.num_items), 0);
  if (filter_seen) {
    for (int item : seen_items) {
      if (item >= 0 && item < model.num_items) excluded[static_cast<std::size_t>(item)] = 1;
    }
  }
  std::vector<int> candidates;
  candidates.reserve(logits.size());
  for (int i = 0; i < model.num_items; ++i) {
    if (!excluded[static_cast<std::size_t>(i)]) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw InferenceError("predict_topk: empty candidate set after filtering seen items");
  }
  const std::size_t take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(),
                    candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                    [&logits](int a, int b) {
                      const Real la = logits[static_cast<std::size_t>(a)];
                      const Real lb = logits[static_cast<std::size_t>(b)];
                      return la != lb ? la > lb : a < b;
                    });
  candidates.resize(take);
  return candidates;
}

// Variant-aware inference from a raw (items, polarity) history: positive
// subsequence for positive-sequence variants, the full sequence otherwise.
// Inference always runs through the primary encoder.
template <typename Real>
std::vector<int> recommend(const ModelParams<Real>& model, std::span<const int> items,
                           std::span<const std::uint8_t> polarity, std::size_t k,
                           bool filter_seen) {
  if (items.size() != polarity.size()) {
    throw DimensionError("recommend: items and polarity lengths disagree");
  }
  std::vector<int> input;
  if (variant_uses_full_sequence(model.variant)) {
    input.assign(items.begin(), items.end());
  } else {
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (polarity[i]) input.push_back(items[i]);
    }
    if (input.empty()) {
      throw InferenceError("recommend: history has no positive items");
    }
  }
  return predict_topk(model, input, items, k, filter_seen);
}

// ---- checkpoints ----
// Layout: "PNFR", u32 version, u32 {dim, num_blocks, num_heads, max_len,
// num_items, variant}, then each tensor in ModelParams::all() order as
// u32 rank, u32 dims, little-endian f32 payload.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32(out, bits);
}

inline float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace detail

template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<Real>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("PNFR", 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.dim));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.num_blocks));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.num_heads));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.max_len));
  detail::put_u32(out, static_cast<std::uint32_t>(model.num_items));
  detail::put_u32(out, static_cast<std::uint32_t>(model.variant));
  for (const Parameter<Real>* p : model.all()) {
    detail::put_u32(out, static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t dim : p->value.shape()) {
      detail::put_u32(out, static_cast<std::uint32_t>(dim));
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      detail::put_f32(out, static_cast<float>(p->value[i]));
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline ModelParams<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "PNFR") {
    throw DataError(path.string() + ": not a pnfrec checkpoint");
  }
  const std::uint32_t version = detail::get_u32(in);
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " +
                    std::to_string(version));
  }
  EncoderConfig cfg;
  cfg.dim = static_cast<int>(detail::get_u32(in));
  cfg.num_blocks = static_cast<int>(detail::get_u32(in));
  cfg.num_heads = static_cast<int>(detail::get_u32(in));
  cfg.max_len = static_cast<int>(detail::get_u32(in));
  const int num_items = static_cast<int>(detail::get_u32(in));
  const std::uint32_t vtag = detail::get_u32(in);
  if (vtag > 3) throw DataError(path.string() + ": unknown variant tag");
  cfg.dropout = 0.0;  // checkpoints are inference artifacts

  ModelParams<float> model = ModelParams<float>::init(static_cast<ModelVariant>(vtag), cfg,
                                                      num_items, /*seed=*/0);
  for (Parameter<float>* p : model.all()) {
    const std::uint32_t rank = detail::get_u32(in);
    std::vector<std::size_t> shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = detail::get_u32(in);
    if (shape != p->value.shape()) {
      throw DataError(path.string() + ": tensor " + p->name + " has shape " +
                      shape_to_string(shape) + ", expected " +
                      shape_to_string(p->value.shape()));
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = detail::get_f32(in);
  }
  char extra;
  if (in.read(&extra, 1)) throw DataError(path.string() + ": trailing bytes in checkpoint");
  return model;
}

}  // namespace pnfrec
