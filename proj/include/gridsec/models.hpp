// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <memory>
#include <string>

#include "gridsec/boosting.hpp"
#include "gridsec/classifier.hpp"
#include "gridsec/forest.hpp"
#include "gridsec/knn.hpp"
#include "gridsec/lstm.hpp"

namespace gridsec {

inline constexpr std::array<const char*, 7> kModelKinds = {
    "gbdt",         "leafwise-gbdt", "decision-tree", "extra-trees",
    "random-forest", "knn",          "bilstm"};

inline std::unique_ptr<StabilityClassifier> make_classifier(
    const std::string& kind) {
  if (kind == "gbdt") return std::make_unique<GbdtClassifier>();
  if (kind == "leafwise-gbdt") return std::make_unique<LeafwiseGbdtClassifier>();
  if (kind == "decision-tree") return std::make_unique<DecisionTreeClassifier>();
  if (kind == "extra-trees") return std::make_unique<ExtraTreesClassifier>();
  if (kind == "random-forest") return std::make_unique<RandomForestClassifier>();
  if (kind == "knn") return std::make_unique<KnnClassifier>();
  if (kind == "bilstm") return std::make_unique<BiLstmClassifier>();
  throw ConfigError("unknown model kind: " + kind);
}

// Restores a model saved with save_model from <stem>.json + <stem>.gsm.
inline std::unique_ptr<StabilityClassifier> load_model(
    const std::string& stem) {
  std::ifstream meta(stem + ".json");
  if (!meta) throw std::runtime_error("cannot open file: " + stem + ".json");
  nlohmann::json sidecar = nlohmann::json::parse(meta);
  if (sidecar.value("format", "") != "gridsec-model")
    throw std::runtime_error("not a model metadata file: " + stem + ".json");
  if (sidecar.at("version").get<std::uint32_t>() != kModelFormatVersion)
    throw std::runtime_error(
        "unsupported model file version " +
        std::to_string(sidecar.at("version").get<std::uint32_t>()));

  nlohmann::json payload = read_model_payload(stem);
  std::string kind = sidecar.at("kind").get<std::string>();
  if (payload.value("kind", kind) != kind)
    throw std::runtime_error("model kind mismatch between metadata and weights");

  std::unique_ptr<StabilityClassifier> model = make_classifier(kind);
  model->load_payload(payload);
  model->training_seed = sidecar.value("training_seed", std::uint64_t{0});
  model->normalization = sidecar.value("normalization", nlohmann::json());
  model->metrics_snapshot = sidecar.value("metrics", nlohmann::json());
  return model;
}

}  // namespace gridsec
