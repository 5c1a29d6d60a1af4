// SPDX-License-Identifier: Apache-2.0
#pragma once

// Gray-box generative attack.  This header deliberately depends on nothing
// but the oracle boundary declared in common.hpp (plus JSON for trace
// serialization): the attack never sees dataset files or model parameters.

#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridsec/common.hpp"

namespace gridsec {

// Latent vector -> batch of synthetic windows, sigmoid-bounded to [0,1].
// Three fully-connected layers; shapes fixed at construction.
class Generator {
 public:
  Generator(int latent_dim, int window_rows, std::uint64_t seed,
            int hidden1 = 128, int hidden2 = 256)
      : latent_dim_(latent_dim),
        window_rows_(window_rows),
        out_dim_(window_rows * kFeatureCount),
        seed_(seed) {
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    Rng rng(Rng::derive(seed, 0));
    auto init = [&](Eigen::Index r, Eigen::Index c) {
      double k = 1.0 / std::sqrt(static_cast<double>(r));
      MatrixXd m(r, c);
      for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.uniform(-k, k);
      return m;
    };
    w1_ = init(latent_dim, hidden1);
    b1_ = init(1, hidden1);
    w2_ = init(hidden1, hidden2);
    b2_ = init(1, hidden2);
    w3_ = init(hidden2, out_dim_);
    b3_ = init(1, out_dim_);
  }

  int latent_dim() const { return latent_dim_; }
  int window_rows() const { return window_rows_; }
  std::uint64_t seed() const { return seed_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  // latent: B x latent_dim -> windows: B x (window_rows * 12), all in [0,1].
  MatrixXd generate(const MatrixXd& latent) const {
    MatrixXd h1, h2;
    return forward(latent, h1, h2);
  }

  // One generator update from a labeled episode-end batch: rows the oracle
  // called stable anchor to their own pattern, rows called unstable are
  // pulled toward `exemplar` (a pattern the oracle has labeled stable),
  // via coordinate-wise binary cross-entropy through the output sigmoid.
  // Runs `inner_steps` Adam iterations on that one queried batch — no
  // further oracle traffic.  Returns the final loss.
  double imprint_update(const MatrixXd& latent, const std::vector<Label>& labels,
                        const VectorXd& exemplar, int inner_steps, double lr) {
    Eigen::Index batch = latent.rows();
    MatrixXd h1, h2;
    MatrixXd out0 = forward(latent, h1, h2);
    MatrixXd target(batch, out_dim_);
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (labels[static_cast<std::size_t>(i)] == Label::Stable)
        target.row(i) = out0.row(i);
      else
        target.row(i) = exemplar.transpose();
    }

    if (adam_m_.empty()) {
      for (const MatrixXd* p : tensors())
        adam_m_.push_back(MatrixXd::Zero(p->rows(), p->cols()));
      adam_v_ = adam_m_;
    }

    double loss = 0.0;
    double denom = static_cast<double>(batch * out_dim_);
    for (int step = 0; step < inner_steps; ++step) {
      MatrixXd out = forward(latent, h1, h2);
      loss = bce_matrix(out, target);
      if (!std::isfinite(loss))
        throw std::runtime_error("non-finite generator loss at inner step " +
                                 std::to_string(step));
      // d loss / d pre-sigmoid = (out - target) / (batch * out_dim)
      MatrixXd dpre3 = (out - target) / denom;
      MatrixXd dw3 = h2.transpose() * dpre3;
      MatrixXd db3 = dpre3.colwise().sum();
      MatrixXd dh2 = dpre3 * w3_.transpose();
      MatrixXd dpre2 =
          dh2.cwiseProduct((h2.array() > 0.0).cast<double>().matrix());
      MatrixXd dw2 = h1.transpose() * dpre2;
      MatrixXd db2 = dpre2.colwise().sum();
      MatrixXd dh1 = dpre2 * w2_.transpose();
      MatrixXd dpre1 =
          dh1.cwiseProduct((h1.array() > 0.0).cast<double>().matrix());
      MatrixXd dw1 = latent.transpose() * dpre1;
      MatrixXd db1 = dpre1.colwise().sum();
      adam_step({&dw1, &db1, &dw2, &db2, &dw3, &db3});
    }
    return loss;
  }

 private:
  std::vector<MatrixXd*> tensors() {
    return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_};
  }

  MatrixXd forward(const MatrixXd& latent, MatrixXd& h1, MatrixXd& h2) const {
    if (latent.cols() != latent_dim_)
      throw std::runtime_error("latent width mismatch");
    h1 = latent * w1_;
    h1.rowwise() += b1_.row(0);
    h1 = h1.cwiseMax(0.0);
    h2 = h1 * w2_;
    h2.rowwise() += b2_.row(0);
    h2 = h2.cwiseMax(0.0);
    MatrixXd out = h2 * w3_;
    out.rowwise() += b3_.row(0);
    return out.unaryExpr([](double v) { return sigmoid(v); });
  }

  static double bce_matrix(const MatrixXd& p, const MatrixXd& t) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        double pv = std::min(std::max(p(i, j), 1e-12), 1.0 - 1e-12);
        double tv = t(i, j);
        sum += -tv * std::log(pv) - (1.0 - tv) * std::log1p(-pv);
      }
    return sum / static_cast<double>(p.size());
  }

  void adam_step(const std::vector<const MatrixXd*>& grads) {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++adam_t_;
    double corr1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
    double corr2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
    std::vector<MatrixXd*> ps = tensors();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      adam_m_[i] = b1 * adam_m_[i] + (1.0 - b1) * (*grads[i]);
      adam_v_[i] =
          b2 * adam_v_[i] + (1.0 - b2) * grads[i]->cwiseProduct(*grads[i]);
      ps[i]->array() -= lr_ * (adam_m_[i].array() / corr1) /
                        ((adam_v_[i].array() / corr2).sqrt() + eps);
    }
  }

  int latent_dim_;
  int window_rows_;
  int out_dim_;
  std::uint64_t seed_;
  MatrixXd w1_, b1_, w2_, b2_, w3_, b3_;
  std::vector<MatrixXd> adam_m_, adam_v_;
  std::int64_t adam_t_ = 0;
  double lr_ = 1e-2;
};

inline Generator init_generator(int latent_dim, int window_rows,
                                std::uint64_t seed) {
  return Generator(latent_dim, window_rows, seed);
}

struct RLConfig {
  int episodes = 50;
  int max_episode_length = 10;
  double gamma = 0.99;
  double alpha = 0.1;
  int batch_size = 32;
  double convergence_threshold = 0.95;  // batch-level ASR over the probe
  int probe_batches = 20;  // trailing window of training batches
  bool multiplicative_update = false;  // literal printed form of the rule
  bool random_targets = false;         // randomized target labels variant
  int inner_steps = 200;
  double generator_lr = 1e-2;
  std::uint64_t seed = 99;

  void validate() const {
    if (episodes < 1) throw ConfigError("episodes must be positive");
    if (max_episode_length < 1)
      throw ConfigError("max_episode_length must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw ConfigError("gamma must be in (0,1]");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (!(convergence_threshold > 0.0 && convergence_threshold <= 1.0))
      throw ConfigError("convergence_threshold must be in (0,1]");
    if (probe_batches < 1) throw ConfigError("probe_batches must be positive");
  }
};

struct StepTrace {
  int step = 0;
  double reward = 0.0;
  double cumulative_reward = 0.0;  // running total including this step
  double td_error = 0.0;           // reward - cumulative before this step
  double scale = 0.0;              // alpha * td_error * gamma^step
};

struct EpisodeTrace {
  int episode = 0;
  std::vector<StepTrace> steps;
  int batches = 0;  // oracle batches consumed = steps + 1
  double loss = 0.0;

  nlohmann::json step_lines() const {
    nlohmann::json lines = nlohmann::json::array();
    for (const StepTrace& s : steps)
      lines.push_back({{"episode", episode},
                       {"step", s.step},
                       {"reward", s.reward},
                       {"cumulative_reward", s.cumulative_reward},
                       {"td_error", s.td_error},
                       {"scale", s.scale},
                       {"loss", loss},
                       {"batches", batches}});
    return lines;
  }
};

inline void append_traces_jsonl(std::ostream& out, const EpisodeTrace& trace) {
  for (const auto& line : trace.step_lines()) out << line.dump() << "\n";
}

struct GanGridResult {
  std::vector<EpisodeTrace> traces;
  bool converged = false;
  int convergence_episode = -1;  // 1-based episode at which training stopped
  int total_batches = 0;
};

// Full RL-guided training loop against the oracle.  Per step: generate,
// query, reward = fraction of windows labeled per target, then update the
// latent input with exploration noise scaled by alpha * td_error *
// gamma^step (additive on the latent; the literal multiplicative rule sits
// behind RLConfig.multiplicative_update).  Episode end: one extra oracle
// query feeds the generator update.  Convergence is declared when the
// batch-level ASR over the trailing `probe_batches` oracle batches reaches
// the threshold.  `sink`, when given, receives each finished episode so
// traces survive a mid-training abort.
inline GanGridResult train_gangrid(
    Generator& generator, PredictionOracle& oracle, const RLConfig& config,
    const std::function<void(const EpisodeTrace&)>& sink = nullptr) {
  config.validate();
  generator.set_learning_rate(config.generator_lr);

  Rng latent_rng(Rng::derive(config.seed, 1));
  Rng target_rng(Rng::derive(config.seed, 2));

  GanGridResult result;
  std::deque<bool> probe;  // fooling flag per trailing oracle batch

  // Running mean of every window the oracle has labeled stable so far:
  // the only supervision signal available inside the gray box.
  VectorXd exemplar_sum = VectorXd::Zero(generator.window_rows() * kFeatureCount);
  std::int64_t exemplar_count = 0;

  auto note_batch = [&](const std::vector<Label>& labels) {
    bool fooling = true;
    for (Label l : labels)
      if (l != Label::Stable) fooling = false;
    probe.push_back(fooling);
    while (static_cast<int>(probe.size()) > config.probe_batches)
      probe.pop_front();
  };
  auto harvest_stable = [&](const MatrixXd& windows,
                            const std::vector<Label>& labels) {
    for (Eigen::Index i = 0; i < windows.rows(); ++i)
      if (labels[static_cast<std::size_t>(i)] == Label::Stable) {
        exemplar_sum += windows.row(i).transpose();
        ++exemplar_count;
      }
  };

  for (int episode = 0; episode < config.episodes; ++episode) {
    MatrixXd latent(config.batch_size, generator.latent_dim());
    for (Eigen::Index j = 0; j < latent.cols(); ++j)
      for (Eigen::Index i = 0; i < latent.rows(); ++i)
        latent(i, j) = latent_rng.normal();

    std::vector<Label> targets(static_cast<std::size_t>(config.batch_size),
                               Label::Stable);
    if (config.random_targets)
      for (auto& t : targets)
        t = target_rng.uniform() < 0.5 ? Label::Stable : Label::Unstable;

    EpisodeTrace trace;
    trace.episode = episode + 1;
    double cumulative = 0.0;

    for (int step = 0; step < config.max_episode_length; ++step) {
      MatrixXd windows = generator.generate(latent);
      std::vector<Label> labels = oracle.predict_windows(windows);
      note_batch(labels);
      harvest_stable(windows, labels);

      double hits = 0.0;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == targets[i]) hits += 1.0;
      double reward = hits / static_cast<double>(labels.size());

      double td_error = reward - cumulative;
      cumulative += reward;
      double scale =
          config.alpha * td_error * std::pow(config.gamma, step);

      if (config.multiplicative_update) {
        latent *= scale;
      } else {
        for (Eigen::Index j = 0; j < latent.cols(); ++j)
          for (Eigen::Index i = 0; i < latent.rows(); ++i)
            latent(i, j) += scale * latent_rng.normal();
      }

      trace.steps.push_back({step, reward, cumulative, td_error, scale});
    }

    // Episode-end update: one extra oracle query, then the BCE surrogate.
    MatrixXd final_windows = generator.generate(latent);
    std::vector<Label> final_labels = oracle.predict_windows(final_windows);
    note_batch(final_labels);
    harvest_stable(final_windows, final_labels);
    trace.batches = static_cast<int>(trace.steps.size()) + 1;

    if (exemplar_count > 0) {
      VectorXd exemplar = exemplar_sum / static_cast<double>(exemplar_count);
      trace.loss = generator.imprint_update(latent, final_labels, exemplar,
                                            config.inner_steps,
                                            config.generator_lr);
    } else {
      trace.loss = 0.0;  // nothing labeled stable yet; no usable signal
    }

    result.total_batches += trace.batches;
    result.traces.push_back(trace);
    if (sink) sink(result.traces.back());

    if (static_cast<int>(probe.size()) >= config.probe_batches) {
      int fooling = 0;
      for (bool f : probe) fooling += f ? 1 : 0;
      double asr = static_cast<double>(fooling) /
                   static_cast<double>(probe.size());
      if (asr >= config.convergence_threshold) {
        result.converged = true;
        result.convergence_episode = episode + 1;
        break;
      }
    }
  }
  return result;
}

inline std::vector<MatrixXd> generate_batches(const Generator& generator,
                                              int count, int batch_size,
                                              std::uint64_t seed) {
  if (count <= 0) throw std::runtime_error("batch count must be positive");
  if (batch_size <= 0) throw std::runtime_error("batch_size must be positive");
  Rng rng(seed);
  std::vector<MatrixXd> batches;
  batches.reserve(static_cast<std::size_t>(count));
  for (int b = 0; b < count; ++b) {
    MatrixXd latent(batch_size, generator.latent_dim());
    for (Eigen::Index j = 0; j < latent.cols(); ++j)
      for (Eigen::Index i = 0; i < latent.rows(); ++i)
        latent(i, j) = rng.normal();
    batches.push_back(generator.generate(latent));
  }
  return batches;
}

struct ASRResult {
  int batches_sent = 0;
  int batches_fooling = 0;
  double asr = 0.0;               // batches_fooling / batches_sent
  double window_stable_rate = 0.0;
};

// A batch "fools" the oracle when every window in it is labeled stable.
inline ASRResult compute_asr(const std::vector<std::vector<Label>>& batch_labels) {
  if (batch_labels.empty())
    throw std::runtime_error("no batches sent: ASR undefined");
  ASRResult r;
  std::int64_t stable_windows = 0, total_windows = 0;
  for (const auto& labels : batch_labels) {
    bool fooling = !labels.empty();
    for (Label l : labels) {
      total_windows += 1;
      if (l == Label::Stable)
        stable_windows += 1;
      else
        fooling = false;
    }
    r.batches_sent += 1;
    if (fooling) r.batches_fooling += 1;
  }
  r.asr = static_cast<double>(r.batches_fooling) /
          static_cast<double>(r.batches_sent);
  r.window_stable_rate = total_windows == 0
                             ? 0.0
                             : static_cast<double>(stable_windows) /
                                   static_cast<double>(total_windows);
  return r;
}

inline double estimate_campaign_seconds(int batches,
                                        double cadence_seconds = 16.0) {
  if (batches <= 0) throw std::runtime_error("empty traces: no batches to time");
  return static_cast<double>(batches) * cadence_seconds;
}

inline double estimate_campaign_time(const std::vector<EpisodeTrace>& traces,
                                     double cadence_seconds = 16.0) {
  int batches = 0;
  for (const EpisodeTrace& t : traces) batches += t.batches;
  return estimate_campaign_seconds(batches, cadence_seconds);
}

}  // namespace gridsec
