// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "mcse/rng.hpp"
#include "mcse/types.hpp"

namespace mcse::test {

inline RealArr random_signal(Index n, std::uint64_t seed, Real scale = 1.0) {
  Rng rng(seed);
  RealArr x(n);
  for (Index i = 0; i < n; ++i) x[i] = scale * rng.normal();
  return x;
}

inline Real rel_l2(const RealArr& a, const RealArr& b) {
  const Real denom = std::sqrt(b.square().sum());
  if (denom == 0.0) return std::sqrt(a.square().sum());
  return std::sqrt((a - b).square().sum()) / denom;
}

inline Real rel_l2(const ComplexArr2& a, const ComplexArr2& b) {
  const Real denom = std::sqrt(b.abs2().sum());
  if (denom == 0.0) return std::sqrt(a.abs2().sum());
  return std::sqrt((a - b).abs2().sum()) / denom;
}

// Unique per-test scratch directory under the system temp path.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("mcse_test_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace mcse::test
