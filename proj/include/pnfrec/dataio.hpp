#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pnfrec/errors.hpp"
#include "pnfrec/rng.hpp"

namespace pnfrec {

struct Interaction {
  int user = 0;
  int item = 0;
  double value = 0;
  std::int64_t ts = 0;
};

// Timestamped interaction records with dense internal IDs. Records are
// sorted by (user, timestamp); ties keep their original file order.
struct InteractionLog {
  std::vector<Interaction> records;
  std::vector<std::string> user_ids;  // internal index -> external id
  std::vector<std::string> item_ids;

  int num_users() const { return static_cast<int>(user_ids.size()); }
  int num_items() const { return static_cast<int>(item_ids.size()); }
};

// InteractionLog plus a per-record polarity: positive iff value >= threshold.
struct LabeledLog {
  InteractionLog log;
  double threshold = 0;
  std::vector<std::uint8_t> positive;  // aligned with log.records
};

// Per-user chronological sequences. `pos` and `neg` hold the most recent
// `max_len` items of each polarity; `full` is the untruncated history.
struct UserSequences {
  int max_len = 0;
  std::vector<std::vector<int>> full;
  std::vector<std::vector<std::uint8_t>> full_pos;
  std::vector<std::vector<int>> pos;
  std::vector<std::vector<int>> neg;
};

struct EvalInteraction {
  int item = 0;
  double value = 0;
  std::int64_t ts = 0;
  bool positive = false;
};

// One held-out user: the last interaction is ground truth, everything
// before it (in per-user order, so timestamp ties stay input) is the
// model input.
struct EvalCase {
  int user = 0;
  std::vector<EvalInteraction> input;
  EvalInteraction ground_truth;
};

struct SplitBundle {
  LabeledLog train;  // keeps the full log's ID maps; records are pre-boundary only
  std::vector<EvalCase> val;
  std::vector<EvalCase> test;
  std::int64_t boundary_ts = 0;
};

struct SplitMeta {
  std::int64_t boundary_ts = 0;
  double threshold = 0;
  int max_len = 0;
  int num_users = 0;
  int num_items = 0;
  std::uint64_t seed = 0;
};

namespace detail {

struct RawRow {
  std::string user, item;
  double value;
  std::int64_t ts;
};

inline std::string trim(std::string s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

inline bool parse_int64(const std::string& s, std::int64_t& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtoll(t.c_str(), &end, 10);
  return end == t.c_str() + t.size();
}

// Dense IDs in first-appearance order, then a stable (user, timestamp) sort.
inline InteractionLog log_from_rows(const std::vector<RawRow>& rows) {
  InteractionLog log;
  std::unordered_map<std::string, int> umap, imap;
  log.records.reserve(rows.size());
  for (const RawRow& r : rows) {
    auto [uit, unew] = umap.try_emplace(r.user, static_cast<int>(log.user_ids.size()));
    if (unew) log.user_ids.push_back(r.user);
    auto [iit, inew] = imap.try_emplace(r.item, static_cast<int>(log.item_ids.size()));
    if (inew) log.item_ids.push_back(r.item);
    log.records.push_back({uit->second, iit->second, r.value, r.ts});
  }
  std::stable_sort(log.records.begin(), log.records.end(),
                   [](const Interaction& a, const Interaction& b) {
                     return a.user != b.user ? a.user < b.user : a.ts < b.ts;
                   });
  return log;
}

inline std::string format_value(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Delimiter-separated interactions with a mandatory header naming the
// columns user_id, item_id, value, timestamp (any order, extras ignored).
// The delimiter (tab or comma) is detected from the header line.
inline InteractionLog load_interactions(const std::filesystem::path& path,
                                         bool allow_empty = false) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("empty input file: " + path.string());
  if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    header.erase(0, 3);  // UTF-8 BOM
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  const std::vector<std::string> cols = detail::split_line(header, delim);
  int c_user = -1, c_item = -1, c_value = -1, c_ts = -1;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const std::string name = detail::trim(cols[i]);
    if (name == "user_id") c_user = static_cast<int>(i);
    else if (name == "item_id") c_item = static_cast<int>(i);
    else if (name == "value") c_value = static_cast<int>(i);
    else if (name == "timestamp") c_ts = static_cast<int>(i);
  }
  if (c_user < 0 || c_item < 0 || c_value < 0 || c_ts < 0) {
    throw ParseError(path.string() +
                     ": header must name columns user_id, item_id, value, timestamp");
  }
  std::vector<detail::RawRow> rows;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split_line(line, delim);
    const std::size_t needed = static_cast<std::size_t>(
        std::max(std::max(c_user, c_item), std::max(c_value, c_ts)));
    if (fields.size() <= needed) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) +
                       ": expected at least " + std::to_string(needed + 1) + " fields");
    }
    detail::RawRow r;
    r.user = detail::trim(fields[static_cast<std::size_t>(c_user)]);
    r.item = detail::trim(fields[static_cast<std::size_t>(c_item)]);
    if (r.user.empty() || r.item.empty()) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) +
                       ": empty user_id or item_id");
    }
    if (!detail::parse_double(fields[static_cast<std::size_t>(c_value)], r.value)) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) +
                       ": bad value field '" + fields[static_cast<std::size_t>(c_value)] + "'");
    }
    if (!detail::parse_int64(fields[static_cast<std::size_t>(c_ts)], r.ts)) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) +
                       ": bad timestamp field '" + fields[static_cast<std::size_t>(c_ts)] + "'");
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty() && !allow_empty) {
    throw DataError("no interaction rows in " + path.string());
  }
  return detail::log_from_rows(rows);
}

inline void write_interactions_file(const std::filesystem::path& path,
                                    const InteractionLog& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "user_id\titem_id\tvalue\ttimestamp\n";
  for (const Interaction& r : log.records) {
    out << log.user_ids[static_cast<std::size_t>(r.user)] << '\t'
        << log.item_ids[static_cast<std::size_t>(r.item)] << '\t'
        << detail::format_value(r.value) << '\t' << r.ts << '\n';
  }
}

// Iteratively removes users and items with fewer than k interactions until
// a fixed point, then re-densifies IDs in first-appearance order.
inline InteractionLog kcore_filter(const InteractionLog& log, int k = 5) {
  if (k < 1) throw ConfigError("kcore_filter: k must be >= 1");
  std::vector<Interaction> recs = log.records;
  for (;;) {
    std::vector<int> ucount(log.user_ids.size(), 0), icount(log.item_ids.size(), 0);
    for (const Interaction& r : recs) {
      ++ucount[static_cast<std::size_t>(r.user)];
      ++icount[static_cast<std::size_t>(r.item)];
    }
    std::vector<Interaction> kept;
    kept.reserve(recs.size());
    for (const Interaction& r : recs) {
      if (ucount[static_cast<std::size_t>(r.user)] >= k &&
          icount[static_cast<std::size_t>(r.item)] >= k) {
        kept.push_back(r);
      }
    }
    const bool done = kept.size() == recs.size();
    recs = std::move(kept);
    if (done) break;
  }
  if (recs.empty()) {
    throw DataError("kcore_filter: no records survive " + std::to_string(k) +
                    "-core filtering");
  }
  if (recs.size() == log.records.size()) return log;  // already a fixed point
  InteractionLog out;
  std::vector<int> umap(log.user_ids.size(), -1), imap(log.item_ids.size(), -1);
  out.records.reserve(recs.size());
  for (const Interaction& r : recs) {
    int& u = umap[static_cast<std::size_t>(r.user)];
    if (u < 0) {
      u = static_cast<int>(out.user_ids.size());
      out.user_ids.push_back(log.user_ids[static_cast<std::size_t>(r.user)]);
    }
    int& i = imap[static_cast<std::size_t>(r.item)];
    if (i < 0) {
      i = static_cast<int>(out.item_ids.size());
      out.item_ids.push_back(log.item_ids[static_cast<std::size_t>(r.item)]);
    }
    out.records.push_back({u, i, r.value, r.ts});
  }
  return out;
}

inline LabeledLog assign_feedback(InteractionLog log, double threshold) {
  if (!std::isfinite(threshold)) throw ConfigError("assign_feedback: non-finite threshold");
  LabeledLog out;
  out.threshold = threshold;
  out.positive.reserve(log.records.size());
  for (const Interaction& r : log.records) {
    out.positive.push_back(r.value >= threshold ? 1 : 0);
  }
  out.log = std::move(log);
  return out;
}

inline UserSequences build_sequences(const LabeledLog& labeled, int max_len) {
  if (max_len < 1) throw ConfigError("build_sequences: max length must be >= 1");
  const std::size_t nu = labeled.log.user_ids.size();
  UserSequences seqs;
  seqs.max_len = max_len;
  seqs.full.resize(nu);
  seqs.full_pos.resize(nu);
  seqs.pos.resize(nu);
  seqs.neg.resize(nu);
  for (std::size_t i = 0; i < labeled.log.records.size(); ++i) {
    const Interaction& r = labeled.log.records[i];
    const auto u = static_cast<std::size_t>(r.user);
    seqs.full[u].push_back(r.item);
    seqs.full_pos[u].push_back(labeled.positive[i]);
    (labeled.positive[i] ? seqs.pos[u] : seqs.neg[u]).push_back(r.item);
  }
  const auto keep_last = [max_len](std::vector<int>& v) {
    const std::size_t l = static_cast<std::size_t>(max_len);
    if (v.size() > l) v.erase(v.begin(), v.end() - static_cast<std::ptrdiff_t>(l));
  };
  for (std::size_t u = 0; u < nu; ++u) {
    keep_last(seqs.pos[u]);
    keep_last(seqs.neg[u]);
  }
  return seqs;
}

// Global-temporal boundary at the smallest timestamp with >= train_fraction
// of the records strictly before it, then leave-one-out on every user still
// active at or after the boundary. Held-out users are shuffled with
// val_test_seed and assigned alternately to validation and test.
inline SplitBundle temporal_split(const LabeledLog& labeled, double train_fraction,
                                  std::uint64_t val_test_seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("temporal_split: train_fraction must be in (0, 1)");
  }
  const std::size_t n = labeled.log.records.size();
  if (n < 2) throw DataError("temporal_split: need at least 2 records");

  std::vector<std::int64_t> ts;
  ts.reserve(n);
  for (const Interaction& r : labeled.log.records) ts.push_back(r.ts);
  std::sort(ts.begin(), ts.end());
  std::size_t target = static_cast<std::size_t>(
      std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
  target = std::max<std::size_t>(1, std::min(target, n));
  const std::int64_t boundary = ts[target - 1] + 1;
  if (ts.back() < boundary) {
    throw DataError("temporal_split: no interactions at or after the temporal boundary");
  }

  SplitBundle bundle;
  bundle.boundary_ts = boundary;
  bundle.train.threshold = labeled.threshold;
  bundle.train.log.user_ids = labeled.log.user_ids;
  bundle.train.log.item_ids = labeled.log.item_ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (labeled.log.records[i].ts < boundary) {
      bundle.train.log.records.push_back(labeled.log.records[i]);
      bundle.train.positive.push_back(labeled.positive[i]);
    }
  }

  // Per-user histories in stable chronological order.
  const std::size_t nu = labeled.log.user_ids.size();
  std::vector<std::vector<EvalInteraction>> hist(nu);
  for (std::size_t i = 0; i < n; ++i) {
    const Interaction& r = labeled.log.records[i];
    hist[static_cast<std::size_t>(r.user)].push_back(
        {r.item, r.value, r.ts, labeled.positive[i] != 0});
  }

  std::vector<int> eligible;
  for (std::size_t u = 0; u < nu; ++u) {
    const auto& h = hist[u];
    if (h.empty() || h.back().ts < boundary) continue;  // not active post-boundary
    if (h.size() < 2) continue;                          // empty input
    bool has_positive_input = false;
    for (std::size_t i = 0; i + 1 < h.size(); ++i) {
      if (h[i].positive) {
        has_positive_input = true;
        break;
      }
    }
    if (!has_positive_input) continue;  // inference needs a positive history
    eligible.push_back(static_cast<int>(u));
  }

  Rng rng(val_test_seed);
  rng.shuffle(eligible);
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    const auto u = static_cast<std::size_t>(eligible[i]);
    EvalCase c;
    c.user = eligible[i];
    c.ground_truth = hist[u].back();
    c.input.assign(hist[u].begin(), hist[u].end() - 1);
    (i % 2 == 0 ? bundle.val : bundle.test).push_back(std::move(c));
  }
  return bundle;
}

// ---- persistence ----

inline void write_meta(const std::filesystem::path& path, const SplitMeta& meta) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "boundary_timestamp=" << meta.boundary_ts << '\n'
      << "threshold=" << detail::format_value(meta.threshold) << '\n'
      << "l=" << meta.max_len << '\n'
      << "U=" << meta.num_users << '\n'
      << "N=" << meta.num_items << '\n'
      << "seed=" << meta.seed << '\n';
}

inline SplitMeta read_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  SplitMeta meta;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) +
                       ": expected key=value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    std::int64_t iv = 0;
    double dv = 0;
    if (key == "boundary_timestamp" && detail::parse_int64(value, iv)) meta.boundary_ts = iv;
    else if (key == "threshold" && detail::parse_double(value, dv)) meta.threshold = dv;
    else if (key == "l" && detail::parse_int64(value, iv)) meta.max_len = static_cast<int>(iv);
    else if (key == "U" && detail::parse_int64(value, iv)) meta.num_users = static_cast<int>(iv);
    else if (key == "N" && detail::parse_int64(value, iv)) meta.num_items = static_cast<int>(iv);
    else if (key == "seed" && detail::parse_int64(value, iv))
      meta.seed = static_cast<std::uint64_t>(iv);
    else
      throw ParseError(path.string() + ": line " + std::to_string(lineno) +
                       ": unknown or malformed entry '" + line + "'");
  }
  return meta;
}

// Persists a split as three interaction files plus meta.txt. Eval files
// hold each held-out user's complete history; the last row per user is the
// ground truth.
inline void write_split(const std::filesystem::path& dir, const SplitBundle& bundle,
                        const SplitMeta& meta) {
  std::filesystem::create_directories(dir);
  write_interactions_file(dir / "train.tsv", bundle.train.log);
  const auto write_cases = [&](const std::filesystem::path& path,
                               const std::vector<EvalCase>& cases) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "user_id\titem_id\tvalue\ttimestamp\n";
    const auto& uids = bundle.train.log.user_ids;
    const auto& iids = bundle.train.log.item_ids;
    for (const EvalCase& c : cases) {
      const auto emit = [&](const EvalInteraction& e) {
        out << uids[static_cast<std::size_t>(c.user)] << '\t'
            << iids[static_cast<std::size_t>(e.item)] << '\t'
            << detail::format_value(e.value) << '\t' << e.ts << '\n';
      };
      for (const EvalInteraction& e : c.input) emit(e);
      emit(c.ground_truth);
    }
  };
  write_cases(dir / "val.tsv", bundle.val);
  write_cases(dir / "test.tsv", bundle.test);
  write_meta(dir / "meta.txt", meta);
}

// Rebuilds a SplitBundle from a split directory. Internal IDs are assigned
// deterministically from the union of the three files (train first), so a
// checkpoint trained from this directory always agrees with later
// evaluations of the same directory.
inline std::pair<SplitBundle, SplitMeta> read_split(const std::filesystem::path& dir) {
  const SplitMeta meta = read_meta(dir / "meta.txt");
  const InteractionLog train_raw = load_interactions(dir / "train.tsv");

  struct FileRows {
    std::vector<detail::RawRow> rows;
  };
  const auto load_raw = [](const std::filesystem::path& p) {
    // Reuse the loader, then recover external ids in record order.
    const InteractionLog log = load_interactions(p, /*allow_empty=*/true);
    FileRows fr;
    fr.rows.reserve(log.records.size());
    for (const Interaction& r : log.records) {
      fr.rows.push_back({log.user_ids[static_cast<std::size_t>(r.user)],
                         log.item_ids[static_cast<std::size_t>(r.item)], r.value, r.ts});
    }
    return fr;
  };
  const FileRows val_rows = load_raw(dir / "val.tsv");
  const FileRows test_rows = load_raw(dir / "test.tsv");

  // Global mapping: train order first, then val, then test.
  std::unordered_map<std::string, int> umap, imap;
  std::vector<std::string> uids, iids;
  const auto map_user = [&](const std::string& ext) {
    auto [it, fresh] = umap.try_emplace(ext, static_cast<int>(uids.size()));
    if (fresh) uids.push_back(ext);
    return it->second;
  };
  const auto map_item = [&](const std::string& ext) {
    auto [it, fresh] = imap.try_emplace(ext, static_cast<int>(iids.size()));
    if (fresh) iids.push_back(ext);
    return it->second;
  };

  SplitBundle bundle;
  bundle.boundary_ts = meta.boundary_ts;
  bundle.train.threshold = meta.threshold;
  for (const Interaction& r : train_raw.records) {
    const int u = map_user(train_raw.user_ids[static_cast<std::size_t>(r.user)]);
    const int i = map_item(train_raw.item_ids[static_cast<std::size_t>(r.item)]);
    bundle.train.log.records.push_back({u, i, r.value, r.ts});
    bundle.train.positive.push_back(r.value >= meta.threshold ? 1 : 0);
  }

  const auto build_cases = [&](const FileRows& fr, std::vector<EvalCase>& out_cases) {
    std::vector<int> order;
    std::unordered_map<int, std::vector<EvalInteraction>> per_user;
    for (const detail::RawRow& r : fr.rows) {
      const int u = map_user(r.user);
      const int i = map_item(r.item);
      auto [it, fresh] = per_user.try_emplace(u);
      if (fresh) order.push_back(u);
      it->second.push_back({i, r.value, r.ts, r.value >= meta.threshold});
    }
    for (int u : order) {
      auto& h = per_user[u];
      if (h.size() < 2) {
        throw DataError(dir.string() + ": eval user with fewer than 2 interactions");
      }
      EvalCase c;
      c.user = u;
      c.ground_truth = h.back();
      c.input.assign(h.begin(), h.end() - 1);
      out_cases.push_back(std::move(c));
    }
  };
  build_cases(val_rows, bundle.val);
  build_cases(test_rows, bundle.test);

  bundle.train.log.user_ids = std::move(uids);
  bundle.train.log.item_ids = std::move(iids);
  if (bundle.train.log.num_users() != meta.num_users ||
      bundle.train.log.num_items() != meta.num_items) {
    throw DataError(dir.string() + ": split files disagree with meta.txt (U=" +
                    std::to_string(bundle.train.log.num_users()) +
                    ", N=" + std::to_string(bundle.train.log.num_items()) + " vs meta U=" +
                    std::to_string(meta.num_users) + ", N=" + std::to_string(meta.num_items) +
                    ")");
  }
  return {std::move(bundle), meta};
}

}  // namespace pnfrec
