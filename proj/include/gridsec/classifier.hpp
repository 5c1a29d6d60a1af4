// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridsec/common.hpp"
#include "gridsec/dataset.hpp"
#include "gridsec/metrics.hpp"

namespace gridsec {

// Common interface for the stability classifiers.  Probabilities refer to
// the positive class ("stable"); a probability of exactly 0.5 resolves to
// stable.  Tree- and neighbour-based models consume the flattened window
// directly; only the recurrent net exposes input gradients.
class StabilityClassifier {
 public:
  virtual ~StabilityClassifier() = default;

  virtual std::string kind() const = 0;
  virtual void train(const WindowSet& train_set, const WindowSet& val_set,
                     std::uint64_t seed) = 0;
  virtual bool trained() const = 0;

  // x: N x (window_rows * 12) in normalized units.
  virtual VectorXd predict_proba(const MatrixXd& x) const = 0;

  virtual bool differentiable() const { return false; }

  // Gradient of the binary cross-entropy between the model output and the
  // given target labels with respect to the input, same shape as x.
  virtual MatrixXd input_gradient(const MatrixXd& x,
                                  const std::vector<Label>& target) const {
    (void)x;
    (void)target;
    throw std::runtime_error("gradients unavailable for model kind '" +
                             kind() + "'");
  }

  virtual nlohmann::json hyperparameters() const = 0;
  virtual nlohmann::json save_payload() const = 0;
  virtual void load_payload(const nlohmann::json& payload) = 0;

  std::vector<Label> predict(const MatrixXd& x) const {
    VectorXd p = predict_proba(x);
    std::vector<Label> out(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i)
      out[static_cast<std::size_t>(i)] =
          p[i] >= 0.5 ? Label::Stable : Label::Unstable;
    return out;
  }

  EvalReport evaluate(const WindowSet& ws) const {
    return evaluate_labels(predict(ws.x), ws.y);
  }

  void require_trained() const {
    if (!trained()) throw std::runtime_error("model not trained: " + kind());
  }

  // Metadata carried alongside the weights.
  std::uint64_t training_seed = 0;
  nlohmann::json normalization;     // copy of the normalizer parameters
  nlohmann::json metrics_snapshot;  // accuracies recorded at training time
};

namespace detail {
inline void check_window_width(const MatrixXd& x, int expected) {
  if (x.cols() != expected)
    throw std::runtime_error(
        "input width mismatch: expected " + std::to_string(expected) +
        " columns, got " + std::to_string(x.cols()));
}
}  // namespace detail

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[5] = "GSMW";

// Weights go to <stem>.gsm (magic + version + MessagePack payload); a
// human-readable sidecar with kind, hyperparameters, seed, normalization
// reference and the recorded metric snapshot goes to <stem>.json.
inline void save_model(const StabilityClassifier& model,
                       const std::string& stem) {
  nlohmann::json sidecar = {
      {"format", "gridsec-model"},
      {"version", kModelFormatVersion},
      {"kind", model.kind()},
      {"hyperparameters", model.hyperparameters()},
      {"training_seed", model.training_seed},
      {"normalization", model.normalization},
      {"metrics", model.metrics_snapshot}};
  std::ofstream meta(stem + ".json");
  if (!meta) throw std::runtime_error("cannot write file: " + stem + ".json");
  meta << sidecar.dump(2) << "\n";

  nlohmann::json payload = model.save_payload();
  payload["kind"] = model.kind();
  std::vector<std::uint8_t> bytes = nlohmann::json::to_msgpack(payload);
  std::ofstream bin(stem + ".gsm", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write file: " + stem + ".gsm");
  bin.write(kModelMagic, 4);
  std::uint32_t ver = kModelFormatVersion;
  bin.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  bin.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

// Reads the binary weight container; the sidecar is consulted by the factory
// loader in models.hpp which reconstructs the right concrete class.
inline nlohmann::json read_model_payload(const std::string& stem) {
  std::ifstream bin(stem + ".gsm", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open file: " + stem + ".gsm");
  char magic[4];
  bin.read(magic, 4);
  if (bin.gcount() != 4 || std::string(magic, 4) != std::string(kModelMagic, 4))
    throw std::runtime_error("not a model weight file: " + stem + ".gsm");
  std::uint32_t ver = 0;
  bin.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (ver != kModelFormatVersion)
    throw std::runtime_error("unsupported model file version " +
                             std::to_string(ver));
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(bin),
                                  std::istreambuf_iterator<char>()};
  return nlohmann::json::from_msgpack(bytes);
}

}  // namespace gridsec
