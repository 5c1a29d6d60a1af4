// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridsec/common.hpp"

namespace gridsec {

// Confusion-count report with "stable" as the positive class.  The derived
// metrics follow the standard identities exactly:
//   accuracy  = (TP + TN) / (TP + TN + FP + FN)
//   precision = TP / (TP + FP)
//   recall    = TP / (TP + FN)
//   f1        = 2 TP / (2 TP + FP + FN)
// A zero denominator yields 0.
struct EvalReport {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
  double accuracy() const {
    return total() == 0 ? 0.0
                        : static_cast<double>(tp + tn) /
                              static_cast<double>(total());
  }
  double precision() const {
    return tp + fp == 0 ? 0.0
                        : static_cast<double>(tp) /
                              static_cast<double>(tp + fp);
  }
  double recall() const {
    return tp + fn == 0 ? 0.0
                        : static_cast<double>(tp) /
                              static_cast<double>(tp + fn);
  }
  double f1() const {
    const std::int64_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0
                      : static_cast<double>(2 * tp) /
                            static_cast<double>(denom);
  }

  nlohmann::json to_json() const {
    return {{"tp", tp},       {"tn", tn},
            {"fp", fp},       {"fn", fn},
            {"accuracy", accuracy()}, {"precision", precision()},
            {"recall", recall()},     {"f1", f1()}};
  }
};

inline EvalReport evaluate_labels(const std::vector<Label>& predicted,
                                  const std::vector<Label>& truth) {
  if (predicted.size() != truth.size())
    throw std::runtime_error("prediction/label count mismatch");
  EvalReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool pos = predicted[i] == Label::Stable;
    const bool is = truth[i] == Label::Stable;
    if (pos && is)
      ++r.tp;
    else if (!pos && !is)
      ++r.tn;
    else if (pos && !is)
      ++r.fp;
    else
      ++r.fn;
  }
  return r;
}

}  // namespace gridsec
