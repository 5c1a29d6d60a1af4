// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gridsec/classifier.hpp"

namespace gridsec {

// Bidirectional single-layer LSTM over the 16x12 window, mean-pooled over
// time, dropout on the pooled feature, then a linear head to one stability
// logit.  Trained with Adam on the logistic loss, gradient-norm clipping,
// and a best-validation-accuracy checkpoint (later epochs win ties).
//
// Everything runs in double precision; all forward/backward passes are
// batched Eigen GEMMs so a full training run stays in CPU budget.
class BiLstmClassifier : public StabilityClassifier {
 public:
  explicit BiLstmClassifier(int hidden = 220, int epochs = 10,
                            int batch_size = 32, double learning_rate = 1e-3,
                            double dropout = 0.5, double input_gain = 0.5,
                            double forget_bias = 2.0, double clip_norm = 1.0)
      : hidden_(hidden),
        epochs_(epochs),
        batch_size_(batch_size),
        learning_rate_(learning_rate),
        dropout_(dropout),
        input_gain_(input_gain),
        forget_bias_(forget_bias),
        clip_norm_(clip_norm) {}

  std::string kind() const override { return "bilstm"; }
  bool trained() const override { return trained_; }
  bool differentiable() const override { return true; }

  void train(const WindowSet& train_set, const WindowSet& val_set,
             std::uint64_t seed) override {
    training_seed = seed;
    rows_ = train_set.window_rows;
    init_params(Rng(Rng::derive(seed, 0)));
    Rng shuffle_rng(Rng::derive(seed, 1));
    Rng dropout_rng(Rng::derive(seed, 2));

    Eigen::Index n = train_set.x.rows();
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i)
      y[i] = train_set.y[static_cast<std::size_t>(i)] == Label::Stable ? 1.0
                                                                       : 0.0;

    std::vector<MatrixXd> m_state, v_state;
    for (const MatrixXd& p : params_) {
      m_state.push_back(MatrixXd::Zero(p.rows(), p.cols()));
      v_state.push_back(MatrixXd::Zero(p.rows(), p.cols()));
    }
    std::int64_t adam_t = 0;

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      perm[static_cast<std::size_t>(i)] = static_cast<int>(i);

    double best_val = -1.0;
    int best_epoch = -1;
    std::vector<MatrixXd> best_params = params_;

    for (int epoch = 0; epoch < epochs_; ++epoch) {
      shuffle_rng.shuffle(perm);
      for (Eigen::Index start = 0; start < n;
           start += static_cast<Eigen::Index>(batch_size_)) {
        Eigen::Index count =
            std::min<Eigen::Index>(batch_size_, n - start);
        MatrixXd xb(count, train_set.x.cols());
        VectorXd yb(count);
        for (Eigen::Index i = 0; i < count; ++i) {
          int src = perm[static_cast<std::size_t>(start + i)];
          xb.row(i) = train_set.x.row(src);
          yb[i] = y[src];
        }

        Cache cache;
        MatrixXd mask = dropout_mask(count, dropout_rng);
        VectorXd logits = forward(xb, &cache, &mask);

        double loss = 0.0;
        for (Eigen::Index i = 0; i < count; ++i)
          loss += bce_with_logit(logits[i], yb[i]);
        loss /= static_cast<double>(count);
        if (!std::isfinite(loss))
          throw std::runtime_error("training diverged: non-finite loss");

        VectorXd dlogit(count);
        for (Eigen::Index i = 0; i < count; ++i)
          dlogit[i] = (sigmoid(logits[i]) - yb[i]) /
                      static_cast<double>(count);

        std::vector<MatrixXd> grads = zero_like(params_);
        backward(xb, cache, mask, dlogit, grads, nullptr);
        clip_gradients(grads);
        adam_step(grads, m_state, v_state, ++adam_t);
      }

      double val_acc = accuracy_on(val_set);
      if (val_acc >= best_val) {  // later epochs win ties
        best_val = val_acc;
        best_epoch = epoch;
        best_params = params_;
      }
    }

    params_ = best_params;
    trained_ = true;
    metrics_snapshot["best_epoch"] = best_epoch;
    metrics_snapshot["best_val_accuracy"] = best_val;
  }

  VectorXd predict_proba(const MatrixXd& x) const override {
    require_trained();
    detail::check_window_width(x, rows_ * kFeatureCount);
    VectorXd p(x.rows());
    const Eigen::Index chunk = 512;
    for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
      Eigen::Index count = std::min(chunk, x.rows() - start);
      MatrixXd xb = x.middleRows(start, count);
      VectorXd logits = forward(xb, nullptr, nullptr);
      for (Eigen::Index i = 0; i < count; ++i)
        p[start + i] = sigmoid(logits[i]);
    }
    return p;
  }

  MatrixXd input_gradient(const MatrixXd& x,
                          const std::vector<Label>& target) const override {
    require_trained();
    detail::check_window_width(x, rows_ * kFeatureCount);
    if (static_cast<Eigen::Index>(target.size()) != x.rows())
      throw std::runtime_error("prediction/label count mismatch");
    MatrixXd grad(x.rows(), x.cols());
    const Eigen::Index chunk = 256;
    for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
      Eigen::Index count = std::min(chunk, x.rows() - start);
      MatrixXd xb = x.middleRows(start, count);
      Cache cache;
      VectorXd logits = forward(xb, &cache, nullptr);
      // Per-window loss gradient: d BCE(z_i, y_i) / d x_i, no batch scaling.
      VectorXd dlogit(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        double y = target[static_cast<std::size_t>(start + i)] == Label::Stable
                       ? 1.0
                       : 0.0;
        dlogit[i] = sigmoid(logits[i]) - y;
      }
      std::vector<MatrixXd> grads = zero_like(params_);
      MatrixXd dx(count, x.cols());
      MatrixXd identity_mask = MatrixXd::Ones(count, 2 * hidden_);
      backward(xb, cache, identity_mask, dlogit, grads, &dx);
      grad.middleRows(start, count) = dx;
    }
    return grad;
  }

  nlohmann::json hyperparameters() const override {
    return {{"hidden", hidden_},          {"epochs", epochs_},
            {"batch_size", batch_size_},  {"learning_rate", learning_rate_},
            {"dropout", dropout_},        {"input_gain", input_gain_},
            {"forget_bias", forget_bias_},{"clip_norm", clip_norm_}};
  }

  nlohmann::json save_payload() const override {
    nlohmann::json tensors = nlohmann::json::array();
    for (const MatrixXd& p : params_) {
      std::vector<double> flat(static_cast<std::size_t>(p.size()));
      Eigen::Map<MatrixXd>(flat.data(), p.rows(), p.cols()) = p;
      tensors.push_back({{"rows", p.rows()}, {"cols", p.cols()},
                         {"data", std::move(flat)}});
    }
    nlohmann::json j = hyperparameters();
    j["tensors"] = std::move(tensors);
    j["window_rows"] = rows_;
    return j;
  }

  void load_payload(const nlohmann::json& payload) override {
    hidden_ = payload.at("hidden").get<int>();
    epochs_ = payload.at("epochs").get<int>();
    batch_size_ = payload.at("batch_size").get<int>();
    learning_rate_ = payload.at("learning_rate").get<double>();
    dropout_ = payload.at("dropout").get<double>();
    input_gain_ = payload.at("input_gain").get<double>();
    forget_bias_ = payload.at("forget_bias").get<double>();
    clip_norm_ = payload.at("clip_norm").get<double>();
    rows_ = payload.at("window_rows").get<int>();
    params_.clear();
    for (const auto& tj : payload.at("tensors")) {
      Eigen::Index r = tj.at("rows").get<Eigen::Index>();
      Eigen::Index c = tj.at("cols").get<Eigen::Index>();
      std::vector<double> flat = tj.at("data").get<std::vector<double>>();
      MatrixXd p = Eigen::Map<MatrixXd>(flat.data(), r, c);
      params_.push_back(std::move(p));
    }
    trained_ = true;
  }

 private:
  // Parameter layout: per direction Wih (12 x 4H), Whh (H x 4H), b (1 x 4H)
  // with gate chunks ordered [input | forget | cell | output]; then the head
  // Wfc (2H x 1) and bfc (1 x 1).
  enum { kWihF, kWhhF, kBF, kWihB, kWhhB, kBB, kWfc, kBfc, kParamCount };

  struct DirCache {
    std::vector<MatrixXd> i, f, g, o, c, h;  // indexed by time position
  };
  struct Cache {
    DirCache fwd, bwd;
    MatrixXd pooled;   // before dropout
    MatrixXd dropped;  // after dropout (== pooled in eval mode)
  };

  void init_params(Rng rng) {
    params_.assign(kParamCount, MatrixXd());
    double k = 1.0 / std::sqrt(static_cast<double>(hidden_));
    auto uniform_fill = [&](Eigen::Index r, Eigen::Index c, double bound) {
      MatrixXd m(r, c);
      for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.uniform(-bound, bound);
      return m;
    };
    for (int dir = 0; dir < 2; ++dir) {
      int base = dir == 0 ? kWihF : kWihB;
      params_[base] = uniform_fill(kFeatureCount, 4 * hidden_, k) * input_gain_;
      params_[base + 1] = uniform_fill(hidden_, 4 * hidden_, k);
      params_[base + 2] = uniform_fill(1, 4 * hidden_, k);
      params_[base + 2].block(0, hidden_, 1, hidden_).setConstant(forget_bias_);
    }
    double k2 = 1.0 / std::sqrt(static_cast<double>(2 * hidden_));
    params_[kWfc] = uniform_fill(2 * hidden_, 1, k2);
    params_[kBfc] = uniform_fill(1, 1, k2);
  }

  std::vector<MatrixXd> zero_like(const std::vector<MatrixXd>& ps) const {
    std::vector<MatrixXd> out;
    out.reserve(ps.size());
    for (const MatrixXd& p : ps) out.push_back(MatrixXd::Zero(p.rows(), p.cols()));
    return out;
  }

  MatrixXd dropout_mask(Eigen::Index batch, Rng& rng) const {
    MatrixXd mask(batch, 2 * hidden_);
    double keep = 1.0 - dropout_;
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      for (Eigen::Index i = 0; i < batch; ++i)
        mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return mask;
  }

  // Runs one direction over the window; `order` lists time positions in scan
  // order.  Results are stored indexed by actual time position.
  void run_direction(const MatrixXd& x, int wih, int whh, int bias,
                     const std::vector<int>& order, DirCache& dc) const {
    Eigen::Index batch = x.rows();
    int H = hidden_;
    dc.i.assign(static_cast<std::size_t>(rows_), MatrixXd());
    dc.f = dc.g = dc.o = dc.c = dc.h = dc.i;
    MatrixXd h = MatrixXd::Zero(batch, H);
    MatrixXd c = MatrixXd::Zero(batch, H);
    for (int t : order) {
      MatrixXd gates = x.middleCols(t * kFeatureCount, kFeatureCount) *
                           params_[static_cast<std::size_t>(wih)] +
                       h * params_[static_cast<std::size_t>(whh)];
      gates.rowwise() += params_[static_cast<std::size_t>(bias)].row(0);
      std::size_t ts = static_cast<std::size_t>(t);
      dc.i[ts] = gates.block(0, 0, batch, H).unaryExpr(
          [](double v) { return sigmoid(v); });
      dc.f[ts] = gates.block(0, H, batch, H).unaryExpr(
          [](double v) { return sigmoid(v); });
      dc.g[ts] = gates.block(0, 2 * H, batch, H).array().tanh().matrix();
      dc.o[ts] = gates.block(0, 3 * H, batch, H).unaryExpr(
          [](double v) { return sigmoid(v); });
      c = dc.f[ts].cwiseProduct(c) + dc.i[ts].cwiseProduct(dc.g[ts]);
      h = dc.o[ts].cwiseProduct(c.array().tanh().matrix());
      dc.c[ts] = c;
      dc.h[ts] = h;
    }
  }

  std::vector<int> scan_order(bool reverse) const {
    std::vector<int> order(static_cast<std::size_t>(rows_));
    for (int t = 0; t < rows_; ++t)
      order[static_cast<std::size_t>(t)] = reverse ? rows_ - 1 - t : t;
    return order;
  }

  // mask == nullptr means eval mode (no dropout).
  VectorXd forward(const MatrixXd& x, Cache* cache,
                   const MatrixXd* mask) const {
    Cache local;
    Cache& cc = cache ? *cache : local;
    run_direction(x, kWihF, kWhhF, kBF, scan_order(false), cc.fwd);
    run_direction(x, kWihB, kWhhB, kBB, scan_order(true), cc.bwd);

    Eigen::Index batch = x.rows();
    cc.pooled = MatrixXd::Zero(batch, 2 * hidden_);
    for (int t = 0; t < rows_; ++t) {
      std::size_t ts = static_cast<std::size_t>(t);
      cc.pooled.leftCols(hidden_) += cc.fwd.h[ts];
      cc.pooled.rightCols(hidden_) += cc.bwd.h[ts];
    }
    cc.pooled /= static_cast<double>(rows_);
    cc.dropped = mask ? cc.pooled.cwiseProduct(*mask) : cc.pooled;
    VectorXd logits = cc.dropped * params_[kWfc];
    logits.array() += params_[kBfc](0, 0);
    return logits;
  }

  void backprop_direction(const MatrixXd& x, const DirCache& dc,
                          const MatrixXd& dpool, int wih, int whh, int bias,
                          const std::vector<int>& order,
                          std::vector<MatrixXd>& grads, MatrixXd* dx) const {
    Eigen::Index batch = x.rows();
    int H = hidden_;
    MatrixXd dh_carry = MatrixXd::Zero(batch, H);
    MatrixXd dc_carry = MatrixXd::Zero(batch, H);
    // Walk the scan order backwards; position order[s-1] is the predecessor.
    for (int s = rows_ - 1; s >= 0; --s) {
      int t = order[static_cast<std::size_t>(s)];
      std::size_t ts = static_cast<std::size_t>(t);
      MatrixXd dh = dh_carry + dpool / static_cast<double>(rows_);
      MatrixXd tanh_c = dc.c[ts].array().tanh().matrix();
      MatrixXd do_ = dh.cwiseProduct(tanh_c);
      MatrixXd dct = dc_carry +
                     dh.cwiseProduct(dc.o[ts])
                         .cwiseProduct((1.0 - tanh_c.array().square()).matrix());
      MatrixXd di = dct.cwiseProduct(dc.g[ts]);
      MatrixXd dg = dct.cwiseProduct(dc.i[ts]);
      MatrixXd df = MatrixXd::Zero(batch, H);  // c_prev is zero at scan start
      if (s > 0)
        df = dct.cwiseProduct(
            dc.c[static_cast<std::size_t>(order[static_cast<std::size_t>(s - 1)])]);
      dc_carry = dct.cwiseProduct(dc.f[ts]);

      MatrixXd dgates(batch, 4 * H);
      dgates.block(0, 0, batch, H) =
          di.cwiseProduct(dc.i[ts])
              .cwiseProduct((1.0 - dc.i[ts].array()).matrix());
      dgates.block(0, H, batch, H) =
          df.cwiseProduct(dc.f[ts])
              .cwiseProduct((1.0 - dc.f[ts].array()).matrix());
      dgates.block(0, 2 * H, batch, H) =
          dg.cwiseProduct((1.0 - dc.g[ts].array().square()).matrix());
      dgates.block(0, 3 * H, batch, H) =
          do_.cwiseProduct(dc.o[ts])
              .cwiseProduct((1.0 - dc.o[ts].array()).matrix());

      grads[static_cast<std::size_t>(wih)] +=
          x.middleCols(t * kFeatureCount, kFeatureCount).transpose() * dgates;
      if (s > 0) {
        int tp = order[static_cast<std::size_t>(s - 1)];
        grads[static_cast<std::size_t>(whh)] +=
            dc.h[static_cast<std::size_t>(tp)].transpose() * dgates;
      }
      grads[static_cast<std::size_t>(bias)] += dgates.colwise().sum();
      dh_carry = dgates * params_[static_cast<std::size_t>(whh)].transpose();
      if (dx)
        dx->middleCols(t * kFeatureCount, kFeatureCount) +=
            dgates * params_[static_cast<std::size_t>(wih)].transpose();
    }
  }

  void backward(const MatrixXd& x, const Cache& cache, const MatrixXd& mask,
                const VectorXd& dlogit, std::vector<MatrixXd>& grads,
                MatrixXd* dx) const {
    if (dx) dx->setZero();
    grads[kWfc] = cache.dropped.transpose() * dlogit;
    grads[kBfc](0, 0) = dlogit.sum();
    MatrixXd ddropped = dlogit * params_[kWfc].transpose();
    MatrixXd dpooled = ddropped.cwiseProduct(mask);
    backprop_direction(x, cache.fwd, dpooled.leftCols(hidden_), kWihF, kWhhF,
                       kBF, scan_order(false), grads, dx);
    backprop_direction(x, cache.bwd, dpooled.rightCols(hidden_), kWihB, kWhhB,
                       kBB, scan_order(true), grads, dx);
  }

  void clip_gradients(std::vector<MatrixXd>& grads) const {
    double sq = 0.0;
    for (const MatrixXd& g : grads) sq += g.squaredNorm();
    double norm = std::sqrt(sq);
    if (norm > clip_norm_ && norm > 0.0) {
      double scale = clip_norm_ / norm;
      for (MatrixXd& g : grads) g *= scale;
    }
  }

  void adam_step(const std::vector<MatrixXd>& grads,
                 std::vector<MatrixXd>& m_state, std::vector<MatrixXd>& v_state,
                 std::int64_t t) {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
    double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t p = 0; p < params_.size(); ++p) {
      m_state[p] = b1 * m_state[p] + (1.0 - b1) * grads[p];
      v_state[p] = b2 * v_state[p] + (1.0 - b2) * grads[p].cwiseProduct(grads[p]);
      params_[p].array() -=
          learning_rate_ * (m_state[p].array() / corr1) /
          ((v_state[p].array() / corr2).sqrt() + eps);
    }
  }

  double accuracy_on(const WindowSet& ws) const {
    VectorXd logits(ws.x.rows());
    const Eigen::Index chunk = 512;
    for (Eigen::Index start = 0; start < ws.x.rows(); start += chunk) {
      Eigen::Index count = std::min(chunk, ws.x.rows() - start);
      MatrixXd xb = ws.x.middleRows(start, count);
      logits.segment(start, count) = forward(xb, nullptr, nullptr);
    }
    std::int64_t hits = 0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      Label pred = logits[i] >= 0.0 ? Label::Stable : Label::Unstable;
      if (pred == ws.y[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.size());
  }

  int hidden_;
  int epochs_;
  int batch_size_;
  double learning_rate_;
  double dropout_;
  double input_gain_;
  double forget_bias_;
  double clip_norm_;
  int rows_ = kDefaultWindowRows;
  bool trained_ = false;
  std::vector<MatrixXd> params_;
};

}  // namespace gridsec
