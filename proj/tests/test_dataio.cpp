#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "pnfrec/dataio.hpp"
#include "pnfrec/rng.hpp"
#include "pnfrec/synth.hpp"
#include "support/tmpdir.hpp"

using namespace pnfrec;
using pnfrec::testing::read_file;
using pnfrec::testing::TmpDir;
using pnfrec::testing::write_file;

namespace {

// Canonical view of a log keyed by external ids, for comparisons that must
// not depend on internal numbering.
using ExtRecord = std::tuple<std::string, std::string, double, std::int64_t>;

std::vector<ExtRecord> externalize(const InteractionLog& log) {
  std::vector<ExtRecord> out;
  for (const Interaction& r : log.records) {
    out.emplace_back(log.user_ids[static_cast<std::size_t>(r.user)],
                     log.item_ids[static_cast<std::size_t>(r.item)], r.value, r.ts);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Alternative k-core route: remove one offending user or item at a time.
// The k-core is unique, so the fixed point must agree with the batched
// implementation.
std::vector<ExtRecord> single_removal_kcore(const InteractionLog& log, int k) {
  std::vector<ExtRecord> recs = externalize(log);
  for (;;) {
    std::map<std::string, int> ucount, icount;
    for (const auto& [u, i, v, t] : recs) {
      ++ucount[u];
      ++icount[i];
    }
    std::string drop_user, drop_item;
    for (const auto& [u, c] : ucount) {
      if (c < k) {
        drop_user = u;
        break;
      }
    }
    if (drop_user.empty()) {
      for (const auto& [i, c] : icount) {
        if (c < k) {
          drop_item = i;
          break;
        }
      }
    }
    if (drop_user.empty() && drop_item.empty()) return recs;
    std::vector<ExtRecord> kept;
    for (const auto& rec : recs) {
      if (!drop_user.empty() && std::get<0>(rec) == drop_user) continue;
      if (!drop_item.empty() && std::get<1>(rec) == drop_item) continue;
      kept.push_back(rec);
    }
    recs = std::move(kept);
  }
}

InteractionLog log_from(const std::vector<ExtRecord>& rows) {
  std::vector<detail::RawRow> raw;
  for (const auto& [u, i, v, t] : rows) raw.push_back({u, i, v, t});
  return detail::log_from_rows(raw);
}

}  // namespace

TEST_CASE("load_interactions remaps ids and sorts records", "[dataio]") {
  TmpDir dir("load");
  write_file(dir / "a.csv",
             "user_id,item_id,value,timestamp\n"
             "u9,m7,5,300\n"
             "u2,m7,3,100\n"
             "u9,m1,1,200\n");
  const InteractionLog log = load_interactions(dir / "a.csv");
  REQUIRE(log.records.size() == 3);
  REQUIRE(log.num_users() == 2);
  REQUIRE(log.num_items() == 2);
  // First appearance order: u9 -> 0, u2 -> 1; m7 -> 0, m1 -> 1.
  REQUIRE(log.user_ids[0] == "u9");
  REQUIRE(log.item_ids[1] == "m1");
  // Sorted by (user, timestamp): u9@200, u9@300, u2@100.
  REQUIRE(log.records[0].ts == 200);
  REQUIRE(log.records[1].ts == 300);
  REQUIRE(log.records[2].user == 1);
}

TEST_CASE("load_interactions detects tab delimiter and ignores extra columns", "[dataio]") {
  TmpDir dir("load_tab");
  write_file(dir / "a.tsv",
             "item_id\tuser_id\textra\tvalue\ttimestamp\r\n"
             "i1\tu1\tx\t4\t10\r\n"
             "i2\tu1\ty\t2\t20\r\n");
  const InteractionLog log = load_interactions(dir / "a.tsv");
  REQUIRE(log.records.size() == 2);
  REQUIRE(log.records[0].value == 4.0);
  REQUIRE(log.records[1].ts == 20);
}

TEST_CASE("load_interactions error paths", "[dataio]") {
  TmpDir dir("load_err");
  write_file(dir / "bad_ts.csv",
             "user_id,item_id,value,timestamp\n"
             "u1,i1,4,100\n"
             "u1,i2,4,oops\n");
  REQUIRE_THROWS_MATCHES(load_interactions(dir / "bad_ts.csv"), ParseError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("line 3")));

  write_file(dir / "empty.csv", "");
  REQUIRE_THROWS_AS(load_interactions(dir / "empty.csv"), DataError);
  write_file(dir / "header_only.csv", "user_id,item_id,value,timestamp\n");
  REQUIRE_THROWS_AS(load_interactions(dir / "header_only.csv"), DataError);

  write_file(dir / "missing_col.csv", "user_id,item_id,value\nu1,i1,4\n");
  REQUIRE_THROWS_AS(load_interactions(dir / "missing_col.csv"), ParseError);

  REQUIRE_THROWS_AS(load_interactions(dir / "nonexistent.csv"), IoError);
}

TEST_CASE("duplicate (user, item, timestamp) rows are both kept", "[dataio]") {
  TmpDir dir("dups");
  write_file(dir / "a.csv",
             "user_id,item_id,value,timestamp\n"
             "u1,i1,4,100\n"
             "u1,i1,4,100\n"
             "u1,i2,2,50\n");
  const InteractionLog log = load_interactions(dir / "a.csv");
  REQUIRE(log.records.size() == 3);
  REQUIRE(log.records[1].item == log.records[2].item);
}

TEST_CASE("kcore keeps an already-valid log unchanged", "[dataio]") {
  std::vector<ExtRecord> rows;
  for (int u = 0; u < 6; ++u) {
    for (int i = 0; i < 6; ++i) {
      rows.emplace_back("u" + std::to_string(u), "i" + std::to_string(i), 4.0,
                        u * 100 + i);
    }
  }
  const InteractionLog log = log_from(rows);
  const InteractionLog filtered = kcore_filter(log, 5);
  REQUIRE(externalize(filtered) == externalize(log));
  REQUIRE(filtered.user_ids == log.user_ids);  // exact fixed point, ids untouched
}

TEST_CASE("kcore hand-traced cascade on an 8-user toy log", "[dataio]") {
  // u1..u6 each interact with i0..i4. u7 has 4 records (removed first),
  // u0 leans on i5 which only survives through u7, so u0 cascades away too.
  std::vector<ExtRecord> rows;
  for (int u = 1; u <= 6; ++u) {
    for (int i = 0; i < 5; ++i) {
      rows.emplace_back("u" + std::to_string(u), "i" + std::to_string(i), 5.0,
                        u * 1000 + i);
    }
  }
  for (int r = 0; r < 4; ++r) rows.emplace_back("u0", "i5", 5.0, 10 + r);
  rows.emplace_back("u0", "i0", 5.0, 20);
  rows.emplace_back("u7", "i5", 5.0, 30);
  rows.emplace_back("u7", "i0", 5.0, 31);
  rows.emplace_back("u7", "i1", 5.0, 32);
  rows.emplace_back("u7", "i2", 5.0, 33);

  const InteractionLog log = log_from(rows);
  const InteractionLog filtered = kcore_filter(log, 5);
  REQUIRE(filtered.records.size() == 30);
  REQUIRE(filtered.num_users() == 6);
  REQUIRE(filtered.num_items() == 5);
  for (const std::string& u : filtered.user_ids) {
    REQUIRE(u != "u0");
    REQUIRE(u != "u7");
  }
  REQUIRE(externalize(filtered) == single_removal_kcore(log, 5));
}

TEST_CASE("kcore equals the single-removal oracle on random logs", "[dataio]") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    Rng rng(seed);
    std::vector<ExtRecord> rows;
    const int n = 120 + static_cast<int>(rng.uniform_int(120));
    for (int r = 0; r < n; ++r) {
      rows.emplace_back("u" + std::to_string(rng.uniform_int(30)),
                        "i" + std::to_string(rng.uniform_int(15)), 4.0, r);
    }
    const InteractionLog log = log_from(rows);
    std::vector<ExtRecord> expected;
    bool oracle_empty = false;
    expected = single_removal_kcore(log, 5);
    oracle_empty = expected.empty();
    if (oracle_empty) {
      REQUIRE_THROWS_AS(kcore_filter(log, 5), DataError);
    } else {
      const InteractionLog filtered = kcore_filter(log, 5);
      REQUIRE(externalize(filtered) == expected);
      // Re-applying the filter is the identity.
      const InteractionLog again = kcore_filter(filtered, 5);
      REQUIRE(externalize(again) == externalize(filtered));
      REQUIRE(again.user_ids == filtered.user_ids);
      REQUIRE(again.item_ids == filtered.item_ids);
    }
  }
}

TEST_CASE("kcore with k=1 is the identity; k must be positive", "[dataio]") {
  std::vector<ExtRecord> rows{{"a", "x", 1.0, 1}, {"b", "y", 2.0, 2}};
  const InteractionLog log = log_from(rows);
  const InteractionLog same = kcore_filter(log, 1);
  REQUIRE(externalize(same) == externalize(log));
  REQUIRE(same.user_ids == log.user_ids);
  REQUIRE_THROWS_AS(kcore_filter(log, 0), ConfigError);
}

TEST_CASE("kcore that removes everything raises a data error", "[dataio]") {
  std::vector<ExtRecord> rows{{"a", "x", 1.0, 1}, {"b", "x", 1.0, 2}};
  REQUIRE_THROWS_AS(kcore_filter(log_from(rows), 5), DataError);
}

TEST_CASE("assign_feedback thresholds values", "[dataio]") {
  // MovieLens-style ratings with threshold 4: 4 and 5 stars are positive.
  std::vector<ExtRecord> rows;
  for (int v = 1; v <= 5; ++v) {
    rows.emplace_back("u", "i" + std::to_string(v), static_cast<double>(v), v);
  }
  const LabeledLog labeled = assign_feedback(log_from(rows), 4.0);
  for (std::size_t i = 0; i < labeled.log.records.size(); ++i) {
    const bool expect = labeled.log.records[i].value >= 4.0;
    REQUIRE((labeled.positive[i] != 0) == expect);
  }

  // Threshold below the minimum value: everything positive.
  const LabeledLog all_pos = assign_feedback(log_from(rows), 0.5);
  for (std::uint8_t p : all_pos.positive) REQUIRE(p == 1);

  // Threshold 5 on a 1..5 scale: only 5-star interactions are positive.
  const LabeledLog only5 = assign_feedback(log_from(rows), 5.0);
  int positives = 0;
  for (std::size_t i = 0; i < only5.positive.size(); ++i) {
    if (only5.positive[i]) {
      ++positives;
      REQUIRE(only5.log.records[i].value == 5.0);
    }
  }
  REQUIRE(positives == 1);

  REQUIRE_THROWS_AS(assign_feedback(log_from(rows), std::nan("")), ConfigError);
}

TEST_CASE("threshold 4 on a MovieLens-shaped histogram gives about 42% negative",
          "[dataio]") {
  // Star shares close to the published MovieLens-1M distribution.
  const std::vector<std::pair<double, int>> hist{
      {1.0, 56}, {2.0, 107}, {3.0, 261}, {4.0, 349}, {5.0, 227}};
  std::vector<ExtRecord> rows;
  int t = 0;
  for (const auto& [value, count] : hist) {
    for (int c = 0; c < count; ++c) {
      rows.emplace_back("u" + std::to_string(t % 10), "i" + std::to_string(t % 37), value, t);
      ++t;
    }
  }
  const LabeledLog labeled = assign_feedback(log_from(rows), 4.0);
  std::size_t neg = 0;
  for (std::uint8_t p : labeled.positive) {
    if (!p) ++neg;
  }
  const double share = static_cast<double>(neg) / static_cast<double>(labeled.positive.size());
  REQUIRE(share == Catch::Approx(0.42).margin(0.015));
}

TEST_CASE("build_sequences hand trace", "[dataio]") {
  // History A+, B-, C+, D-, E+ with l = 2.
  std::vector<ExtRecord> rows{{"u", "A", 5, 1}, {"u", "B", 1, 2}, {"u", "C", 5, 3},
                              {"u", "D", 1, 4}, {"u", "E", 5, 5}};
  const LabeledLog labeled = assign_feedback(log_from(rows), 3.0);
  const UserSequences seqs = build_sequences(labeled, 2);
  const auto& iid = labeled.log.item_ids;
  REQUIRE(seqs.pos[0].size() == 2);
  REQUIRE(iid[static_cast<std::size_t>(seqs.pos[0][0])] == "C");
  REQUIRE(iid[static_cast<std::size_t>(seqs.pos[0][1])] == "E");
  REQUIRE(seqs.neg[0].size() == 2);
  REQUIRE(iid[static_cast<std::size_t>(seqs.neg[0][0])] == "B");
  REQUIRE(iid[static_cast<std::size_t>(seqs.neg[0][1])] == "D");
  REQUIRE(seqs.full[0].size() == 5);

  // l = 1 keeps the most recent item of each polarity.
  const UserSequences one = build_sequences(labeled, 1);
  REQUIRE(one.pos[0] == std::vector<int>{seqs.pos[0][1]});
  REQUIRE(one.neg[0] == std::vector<int>{seqs.neg[0][1]});

  REQUIRE_THROWS_AS(build_sequences(labeled, 0), ConfigError);
}

TEST_CASE("build_sequences: all-positive user has an empty negative sequence", "[dataio]") {
  std::vector<ExtRecord> rows{{"u", "A", 5, 1}, {"u", "B", 4, 2}};
  const UserSequences seqs = build_sequences(assign_feedback(log_from(rows), 3.0), 10);
  REQUIRE(seqs.pos[0].size() == 2);
  REQUIRE(seqs.neg[0].empty());
}

TEST_CASE("per-user sequences are invariant to input row order", "[dataio]") {
  Rng rng(5);
  std::vector<ExtRecord> rows;
  for (int u = 0; u < 8; ++u) {
    for (int t = 0; t < 12; ++t) {
      rows.emplace_back("u" + std::to_string(u), "i" + std::to_string(rng.uniform_int(20)),
                        rng.uniform() < 0.7 ? 5.0 : 1.0, t + 1);
    }
  }
  std::vector<ExtRecord> shuffled = rows;
  rng.shuffle(shuffled);

  const auto seqs_of = [](const std::vector<ExtRecord>& rws) {
    const LabeledLog labeled = assign_feedback(log_from(rws), 3.0);
    std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> out;
    const UserSequences seqs = build_sequences(labeled, 5);
    for (std::size_t u = 0; u < labeled.log.user_ids.size(); ++u) {
      auto& entry = out[labeled.log.user_ids[u]];
      for (int item : seqs.pos[u]) {
        entry.first.push_back(labeled.log.item_ids[static_cast<std::size_t>(item)]);
      }
      for (int item : seqs.neg[u]) {
        entry.second.push_back(labeled.log.item_ids[static_cast<std::size_t>(item)]);
      }
    }
    return out;
  };
  REQUIRE(seqs_of(rows) == seqs_of(shuffled));
}

TEST_CASE("temporal_split hand trace with 10 records", "[dataio]") {
  // u0 at ts {1,3,5,7,9,10}, u1 at ts {2,4,6,8}; fraction 0.9 puts 9
  // records in train and leaves u0's ts=10 interaction as ground truth.
  std::vector<ExtRecord> rows;
  for (std::int64_t ts : {1, 3, 5, 7, 9}) rows.emplace_back("u0", "i" + std::to_string(ts), 5.0, ts);
  rows.emplace_back("u0", "iX", 1.0, 10);  // held-out, negative feedback
  for (std::int64_t ts : {2, 4, 6, 8}) rows.emplace_back("u1", "j" + std::to_string(ts), 5.0, ts);

  const LabeledLog labeled = assign_feedback(log_from(rows), 3.0);
  const SplitBundle bundle = temporal_split(labeled, 0.9, 42);
  REQUIRE(bundle.boundary_ts == 10);
  REQUIRE(bundle.train.log.records.size() == 9);
  REQUIRE(bundle.val.size() + bundle.test.size() == 1);
  const EvalCase& c = bundle.val.empty() ? bundle.test[0] : bundle.val[0];
  REQUIRE(c.ground_truth.ts == 10);
  REQUIRE_FALSE(c.ground_truth.positive);  // value 1 < threshold
  REQUIRE(c.input.size() == 5);
  for (const EvalInteraction& e : c.input) REQUIRE(e.ts < 10);
}

TEST_CASE("temporal_split drops users without usable input", "[dataio]") {
  std::vector<ExtRecord> rows;
  // Enough early records that the boundary lands before the tail.
  for (int t = 0; t < 30; ++t) {
    rows.emplace_back("bulk" + std::to_string(t % 3), "i" + std::to_string(t % 5), 5.0, t);
  }
  rows.emplace_back("single", "i0", 5.0, 1000);  // only interaction is post-boundary
  rows.emplace_back("allneg", "i1", 1.0, 500);   // input would hold no positive item
  rows.emplace_back("allneg", "i2", 1.0, 1001);

  const SplitBundle bundle = temporal_split(assign_feedback(log_from(rows), 3.0), 0.9, 1);
  for (const auto* cases : {&bundle.val, &bundle.test}) {
    for (const EvalCase& c : *cases) {
      const std::string& ext =
          bundle.train.log.user_ids[static_cast<std::size_t>(c.user)];
      REQUIRE(ext != "single");
      REQUIRE(ext != "allneg");
    }
  }
}

TEST_CASE("temporal_split with no post-boundary data raises", "[dataio]") {
  // All records share one timestamp: no integer boundary leaves 90% strictly
  // before it and anything after.
  std::vector<ExtRecord> rows;
  for (int i = 0; i < 10; ++i) {
    rows.emplace_back("u" + std::to_string(i % 2), "i" + std::to_string(i), 5.0, 7);
  }
  REQUIRE_THROWS_AS(temporal_split(assign_feedback(log_from(rows), 3.0), 0.9, 1), DataError);
  REQUIRE_THROWS_AS(temporal_split(assign_feedback(log_from(rows), 3.0), 1.5, 1),
                    ConfigError);
}

TEST_CASE("temporal_split properties on synthetic logs", "[dataio]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.n_users = 120;
    cfg.n_items = 40;
    cfg.n_clusters = 5;
    cfg.interactions_per_user = 15;
    cfg.seed = seed;
    const LabeledLog labeled = assign_feedback(generate(cfg).log, kSynthThreshold);
    const SplitBundle bundle = temporal_split(labeled, 0.9, seed + 1);

    // Boundary: at least 90% of records strictly precede it.
    std::size_t before = 0;
    for (const Interaction& r : labeled.log.records) {
      if (r.ts < bundle.boundary_ts) ++before;
    }
    REQUIRE(static_cast<double>(before) >=
            0.9 * static_cast<double>(labeled.log.records.size()));
    REQUIRE(bundle.train.log.records.size() == before);

    // Val/test users disjoint, sizes within one of each other.
    std::set<int> val_users, test_users;
    for (const EvalCase& c : bundle.val) val_users.insert(c.user);
    for (const EvalCase& c : bundle.test) test_users.insert(c.user);
    REQUIRE(val_users.size() == bundle.val.size());
    REQUIRE(test_users.size() == bundle.test.size());
    for (int u : val_users) REQUIRE(test_users.count(u) == 0);
    REQUIRE(std::llabs(static_cast<long long>(bundle.val.size()) -
                       static_cast<long long>(bundle.test.size())) <= 1);

    // Leakage: no ground-truth (user, timestamp) key appears in train.
    std::set<std::pair<int, std::int64_t>> train_keys;
    for (const Interaction& r : bundle.train.log.records) {
      train_keys.emplace(r.user, r.ts);
    }
    for (const auto* cases : {&bundle.val, &bundle.test}) {
      for (const EvalCase& c : *cases) {
        REQUIRE(train_keys.count({c.user, c.ground_truth.ts}) == 0);
        // Inputs hold at least one positive item and end before the GT.
        bool has_pos = false;
        for (const EvalInteraction& e : c.input) has_pos = has_pos || e.positive;
        REQUIRE(has_pos);
        REQUIRE_FALSE(c.input.empty());
      }
    }
  }
}

TEST_CASE("split persistence round trip", "[dataio]") {
  SynthConfig cfg;
  cfg.n_users = 80;
  cfg.n_items = 30;
  cfg.n_clusters = 4;
  cfg.interactions_per_user = 12;
  cfg.seed = 9;
  const LabeledLog labeled = assign_feedback(generate(cfg).log, kSynthThreshold);
  const SplitBundle bundle = temporal_split(labeled, 0.9, 3);

  SplitMeta meta;
  meta.boundary_ts = bundle.boundary_ts;
  meta.threshold = kSynthThreshold;
  meta.max_len = 10;
  meta.num_users = labeled.log.num_users();
  meta.num_items = labeled.log.num_items();
  meta.seed = 3;

  TmpDir dir("split_rt");
  write_split(dir.path(), bundle, meta);
  const auto [loaded, loaded_meta] = read_split(dir.path());

  REQUIRE(loaded_meta.boundary_ts == meta.boundary_ts);
  REQUIRE(loaded_meta.threshold == meta.threshold);
  REQUIRE(loaded_meta.max_len == 10);
  REQUIRE(loaded.train.log.records.size() == bundle.train.log.records.size());
  REQUIRE(loaded.val.size() == bundle.val.size());
  REQUIRE(loaded.test.size() == bundle.test.size());
  REQUIRE(externalize(loaded.train.log) == externalize(bundle.train.log));

  const auto case_view = [](const SplitBundle& b, const std::vector<EvalCase>& cases) {
    std::vector<std::tuple<std::string, std::string, std::int64_t, bool, std::size_t>> out;
    for (const EvalCase& c : cases) {
      out.emplace_back(b.train.log.user_ids[static_cast<std::size_t>(c.user)],
                       b.train.log.item_ids[static_cast<std::size_t>(c.ground_truth.item)],
                       c.ground_truth.ts, c.ground_truth.positive, c.input.size());
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  REQUIRE(case_view(loaded, loaded.val) == case_view(bundle, bundle.val));
  REQUIRE(case_view(loaded, loaded.test) == case_view(bundle, bundle.test));

  // Rewriting produces byte-identical files.
  TmpDir dir2("split_rt2");
  write_split(dir2.path(), bundle, meta);
  for (const char* name : {"train.tsv", "val.tsv", "test.tsv", "meta.txt"}) {
    REQUIRE(read_file(dir / name) == read_file(dir2 / name));
  }
}
