#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pnfrec/dataio.hpp"
#include "pnfrec/errors.hpp"
#include "pnfrec/rng.hpp"

namespace pnfrec {

// Planted like/dislike cluster structure. Each user prefers one cluster;
// the item stream is a sticky Markov walk over clusters, and items from
// the preferred cluster are liked with like_prob_in_cluster, all others
// with like_prob_off_cluster. Feedback values are 5 (like) / 1 (dislike),
// so threshold 3 recovers the draw exactly.
struct SynthConfig {
  int n_users = 2000;
  int n_items = 500;
  int n_clusters = 10;
  int interactions_per_user = 40;
  double like_prob_in_cluster = 0.9;
  double like_prob_off_cluster = 0.1;
  double markov_stickiness = 0.8;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_users < 1 || n_items < 1 || interactions_per_user < 1) {
      throw ConfigError("synth: users, items and interactions per user must be >= 1");
    }
    if (n_clusters < 1 || n_clusters > n_items) {
      throw ConfigError("synth: need 1 <= clusters <= items, got " +
                        std::to_string(n_clusters) + " clusters for " +
                        std::to_string(n_items) + " items");
    }
    const auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob_ok(like_prob_in_cluster) || !prob_ok(like_prob_off_cluster) ||
        !prob_ok(markov_stickiness)) {
      throw ConfigError("synth: probabilities must lie in [0, 1]");
    }
  }
};

inline constexpr double kSynthThreshold = 3.0;

struct SynthResult {
  InteractionLog log;
  std::vector<int> item_cluster;  // by generator item number (== external id)
  std::vector<int> user_pref;     // preferred cluster by generator user number
};

// The walk: stay in the current cluster with probability s; on a jump,
// move to the preferred cluster with probability s, otherwise to a uniform
// non-preferred cluster. Lumping clusters into {preferred, other} gives a
// 2-state chain whose stationary in-preferred-cluster mass is exactly s,
// and the first cluster is drawn from that stationary law.
inline SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const int K = cfg.n_clusters;

  SynthResult result;
  result.item_cluster.resize(static_cast<std::size_t>(cfg.n_items));
  for (int i = 0; i < cfg.n_items; ++i) {
    result.item_cluster[static_cast<std::size_t>(i)] = i % K;
  }
  std::vector<std::vector<int>> cluster_items(static_cast<std::size_t>(K));
  for (int i = 0; i < cfg.n_items; ++i) {
    cluster_items[static_cast<std::size_t>(i % K)].push_back(i);
  }

  result.user_pref.resize(static_cast<std::size_t>(cfg.n_users));
  std::vector<detail::RawRow> rows;
  rows.reserve(static_cast<std::size_t>(cfg.n_users) *
               static_cast<std::size_t>(cfg.interactions_per_user));

  // Shared global time axis so user activity overlaps and the temporal
  // boundary cuts through most users' tails.
  const std::int64_t time_range = static_cast<std::int64_t>(cfg.n_users) *
                                  static_cast<std::int64_t>(cfg.interactions_per_user) * 16;

  const double s = cfg.markov_stickiness;
  for (int u = 0; u < cfg.n_users; ++u) {
    Rng rng = Rng::derive(cfg.seed, "synth/user/" + std::to_string(u));
    const int pref = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(K)));
    result.user_pref[static_cast<std::size_t>(u)] = pref;

    const auto draw_non_pref = [&]() {
      if (K == 1) return pref;
      const auto r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(K - 1)));
      return r < pref ? r : r + 1;
    };
    const auto draw_stationary = [&]() {
      return rng.uniform() < s ? pref : draw_non_pref();
    };

    std::vector<std::int64_t> times(static_cast<std::size_t>(cfg.interactions_per_user));
    for (auto& t : times) {
      t = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(time_range)));
    }
    std::sort(times.begin(), times.end());
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (times[i] <= times[i - 1]) times[i] = times[i - 1] + 1;  // strictly increasing
    }

    int cluster = draw_stationary();
    for (int t = 0; t < cfg.interactions_per_user; ++t) {
      if (t > 0 && rng.uniform() >= s) cluster = draw_stationary();
      const auto& pool = cluster_items[static_cast<std::size_t>(cluster)];
      const int item = pool[rng.uniform_int(pool.size())];
      const double like_prob =
          cluster == pref ? cfg.like_prob_in_cluster : cfg.like_prob_off_cluster;
      const double value = rng.uniform() < like_prob ? 5.0 : 1.0;
      rows.push_back({std::to_string(u), std::to_string(item), value,
                      times[static_cast<std::size_t>(t)]});
    }
  }

  result.log = detail::log_from_rows(rows);
  return result;
}

// Diagnostics sidecar mapping items to clusters and users to their
// preferred cluster.
inline void write_cluster_sidecar(const std::filesystem::path& path,
                                  const SynthResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "kind\tid\tcluster\n";
  for (std::size_t i = 0; i < result.item_cluster.size(); ++i) {
    out << "item\t" << i << '\t' << result.item_cluster[i] << '\n';
  }
  for (std::size_t u = 0; u < result.user_pref.size(); ++u) {
    out << "user\t" << u << '\t' << result.user_pref[u] << '\n';
  }
}

}  // namespace pnfrec
