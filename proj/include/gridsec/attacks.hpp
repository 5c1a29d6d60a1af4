// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gridsec/classifier.hpp"
#include "gridsec/common.hpp"

namespace gridsec {

struct AttackConfig {
  double epsilon = 0.5;   // L-inf budget in normalized feature units
  int iterations = 10;    // BIM/PGD
  double step_size = 0.0; // 0 = epsilon / 4
  bool random_start = true;  // PGD; BIM ignores it
  int noise_attempts = 50;
  std::uint64_t seed = 5;

  double resolved_step() const {
    return step_size > 0.0 ? step_size : epsilon / 4.0;
  }
  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (step_size < 0.0) throw ConfigError("step_size must be positive");
    if (noise_attempts < 0)
      throw ConfigError("noise_attempts must be non-negative");
  }
};

struct AdversarialBatch {
  MatrixXd original;
  MatrixXd perturbed;
  // Gradient attacks: prediction differs from the true label (fooled).
  // Random-noise: prediction differs from the clean prediction (flipped).
  std::vector<bool> success;
  double post_attack_accuracy = 0.0;
};

namespace detail {
inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline void finish_batch(const StabilityClassifier& model,
                         const std::vector<Label>& truth,
                         AdversarialBatch& batch) {
  std::vector<Label> pred = model.predict(batch.perturbed);
  batch.success.assign(pred.size(), false);
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    batch.success[i] = pred[i] != truth[i];
    if (pred[i] == truth[i]) ++hits;
  }
  batch.post_attack_accuracy =
      static_cast<double>(hits) / static_cast<double>(pred.size());
}

// Shared iterated signed-gradient loop.  FGSM is one iteration at full
// budget; BIM iterates with per-step projection; PGD adds the random start.
// The reduction identities BIM(1, eps) == FGSM and PGD(no random start) ==
// BIM hold exactly because all three run through this function.
inline AdversarialBatch signed_gradient_attack(
    const StabilityClassifier& model, const MatrixXd& x,
    const std::vector<Label>& truth, double epsilon, int iterations,
    double step, bool random_start, std::uint64_t seed) {
  AdversarialBatch batch;
  batch.original = x;
  MatrixXd adv = x;

  if (random_start) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < adv.rows(); ++i)
      for (Eigen::Index j = 0; j < adv.cols(); ++j)
        adv(i, j) = clamp01(adv(i, j) + rng.uniform(-epsilon, epsilon));
  }

  for (int it = 0; it < iterations; ++it) {
    MatrixXd grad = model.input_gradient(adv, truth);
    for (Eigen::Index i = 0; i < adv.rows(); ++i)
      for (Eigen::Index j = 0; j < adv.cols(); ++j) {
        double v = adv(i, j) + step * sign0(grad(i, j));
        v = std::min(std::max(v, x(i, j) - epsilon), x(i, j) + epsilon);
        adv(i, j) = clamp01(v);
      }
  }

  batch.perturbed = std::move(adv);
  finish_batch(model, truth, batch);
  return batch;
}
}  // namespace detail

inline AdversarialBatch fgsm(const StabilityClassifier& model,
                             const MatrixXd& x,
                             const std::vector<Label>& truth, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  return detail::signed_gradient_attack(model, x, truth, epsilon,
                                        /*iterations=*/1, /*step=*/epsilon,
                                        /*random_start=*/false, /*seed=*/0);
}

inline AdversarialBatch bim(const StabilityClassifier& model,
                            const MatrixXd& x, const std::vector<Label>& truth,
                            const AttackConfig& config) {
  config.validate();
  return detail::signed_gradient_attack(model, x, truth, config.epsilon,
                                        config.iterations,
                                        config.resolved_step(),
                                        /*random_start=*/false, /*seed=*/0);
}

inline AdversarialBatch pgd(const StabilityClassifier& model,
                            const MatrixXd& x, const std::vector<Label>& truth,
                            const AttackConfig& config) {
  config.validate();
  return detail::signed_gradient_attack(
      model, x, truth, config.epsilon, config.iterations,
      config.resolved_step(), config.random_start, config.seed);
}

// Model-agnostic attack: up to `attempts` candidates x + eps*z per window
// (z standard normal per coordinate, clipped to [0,1], deliberately not
// ball-projected); the first candidate whose prediction differs from the
// clean prediction replaces the window.  Per-window substreams keep the
// candidate sequence fixed, so a larger budget only extends the search:
// the flipped set is monotone in `attempts` on the same seed.
inline AdversarialBatch random_noise_attack(const StabilityClassifier& model,
                                            const MatrixXd& x,
                                            const std::vector<Label>& truth,
                                            double epsilon, int attempts,
                                            std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  AdversarialBatch batch;
  batch.original = x;
  batch.perturbed = x;

  std::vector<Label> clean = model.predict(x);
  std::vector<bool> flipped(static_cast<std::size_t>(x.rows()), false);
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    streams.emplace_back(Rng::derive(seed, static_cast<std::uint64_t>(i)));

  std::vector<Eigen::Index> open(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    open[static_cast<std::size_t>(i)] = i;

  for (int attempt = 0; attempt < attempts && !open.empty(); ++attempt) {
    MatrixXd cand(static_cast<Eigen::Index>(open.size()), x.cols());
    for (std::size_t k = 0; k < open.size(); ++k) {
      Eigen::Index i = open[k];
      Rng& rng = streams[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        cand(static_cast<Eigen::Index>(k), j) =
            clamp01(x(i, j) + epsilon * rng.normal());
    }
    std::vector<Label> pred = model.predict(cand);
    std::vector<Eigen::Index> still_open;
    for (std::size_t k = 0; k < open.size(); ++k) {
      Eigen::Index i = open[k];
      if (pred[k] != clean[static_cast<std::size_t>(i)]) {
        batch.perturbed.row(i) = cand.row(static_cast<Eigen::Index>(k));
        flipped[static_cast<std::size_t>(i)] = true;
      } else {
        still_open.push_back(i);
      }
    }
    open.swap(still_open);
  }

  std::vector<Label> pred = model.predict(batch.perturbed);
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++hits;
  batch.success = flipped;
  batch.post_attack_accuracy =
      static_cast<double>(hits) / static_cast<double>(pred.size());
  return batch;
}

struct SweepPoint {
  double epsilon = 0.0;
  std::string attack;
  std::string model;
  double accuracy = 0.0;
};

inline std::vector<double> default_sweep_epsilons() {
  std::vector<double> eps;
  for (int i = 1; i <= 10; ++i) eps.push_back(0.05 * i);
  return eps;
}

// One post-attack accuracy per epsilon.  FGSM reuses the clean-input
// gradient across budgets (the gradient is evaluated at x for every eps).
inline std::vector<SweepPoint> epsilon_sweep(const StabilityClassifier& model,
                                             const std::string& attack,
                                             const std::vector<double>& epsilons,
                                             const MatrixXd& x,
                                             const std::vector<Label>& truth,
                                             AttackConfig config) {
  if (epsilons.empty()) throw ConfigError("empty epsilon list");
  std::vector<SweepPoint> curve;

  MatrixXd fgsm_sign;
  if (attack == "fgsm") {
    MatrixXd grad = model.input_gradient(x, truth);
    fgsm_sign = grad.unaryExpr([](double v) { return detail::sign0(v); });
  }

  for (double eps : epsilons) {
    config.epsilon = eps;
    config.step_size = 0.0;  // keep the eps/4 rule across the sweep
    double acc = 0.0;
    if (attack == "fgsm") {
      MatrixXd adv = (x + eps * fgsm_sign).cwiseMax(0.0).cwiseMin(1.0);
      std::vector<Label> pred = model.predict(adv);
      std::int64_t hits = 0;
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++hits;
      acc = static_cast<double>(hits) / static_cast<double>(pred.size());
    } else if (attack == "bim") {
      acc = bim(model, x, truth, config).post_attack_accuracy;
    } else if (attack == "pgd") {
      acc = pgd(model, x, truth, config).post_attack_accuracy;
    } else if (attack == "noise") {
      acc = random_noise_attack(model, x, truth, eps, config.noise_attempts,
                                config.seed)
                .post_attack_accuracy;
    } else {
      throw ConfigError("unknown attack: " + attack);
    }
    curve.push_back({eps, attack, model.kind(), acc});
  }
  return curve;
}

}  // namespace gridsec
