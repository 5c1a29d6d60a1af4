// SPDX-License-Identifier: Apache-2.0
// gridsec: robustness evaluation toolkit for grid-stability classifiers.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsec {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kFeatureCount = 12;
inline constexpr int kDefaultWindowRows = 16;
inline constexpr int kDefaultWindowStep = 8;

inline const std::array<std::string, kFeatureCount> kFeatureNames = {
    "tau1", "tau2", "tau3", "tau4", "p1", "p2",
    "p3",   "p4",   "g1",   "g2",   "g3", "g4"};

// Positive class throughout is "stable"; ties at 0.5 resolve to stable.
enum class Label : int { Unstable = 0, Stable = 1 };

inline std::string label_name(Label l) {
  return l == Label::Stable ? "stable" : "unstable";
}

inline Label label_from_name(const std::string& s) {
  if (s == "stable") return Label::Stable;
  if (s == "unstable") return Label::Unstable;
  throw std::runtime_error("unknown label value: '" + s + "'");
}

// Configuration mistakes get their own type so the CLI can map them to a
// dedicated exit code; everything else surfaces as std::runtime_error.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic RNG facade.  All randomness in the project flows through
// this class; draws are derived from raw mt19937_64 output with fixed
// bit-manipulation so sequences are reproducible across standard libraries
// (std distributions leave the mapping implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform on [-1,1).
  double sym() { return 2.0 * uniform() - 1.0; }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0,1], keeps log() finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Unbiased integer in [0,n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t lim = max - max % n;
    std::uint64_t x = eng_();
    while (x >= lim) x = eng_();
    return x % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
  }

  // Derive an independent stream for a substream index (per-window attack
  // draws, per-model seeds, ...).  SplitMix-style mixing of seed and index.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// The gray-box boundary: everything an attacker may touch.  One batch of
// windows in, one hard label per window out.  The gangrid module depends on
// nothing else.
class PredictionOracle {
 public:
  virtual ~PredictionOracle() = default;
  // windows: N x (window_rows * 12), values in [0,1].
  virtual std::vector<Label> predict_windows(const MatrixXd& windows) = 0;
};

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline double sigmoid(double z) {
  if (z >= 0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Numerically stable binary cross-entropy on a logit.
inline double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace gridsec
