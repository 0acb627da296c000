#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "pnfrec/errors.hpp"
#include "pnfrec/rng.hpp"

namespace pnfrec {

// Ordered key=value text, used for run manifests.
class KvFile {
 public:
  void set(std::string key, std::string value) {
    entries_.emplace_back(std::move(key), std::move(value));
  }
  void set(std::string key, std::int64_t value) {
    set(std::move(key), std::to_string(value));
  }
  void set(std::string key, std::uint64_t value) {
    set(std::move(key), std::to_string(value));
  }
  void set(std::string key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    set(std::move(key), std::string(buf));
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// FNV-1a over the file bytes; enough to pin input identity in a manifest.
inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  char out[32];
  std::snprintf(out, sizeof(out), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace pnfrec
