// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gridsec/classifier.hpp"
#include "gridsec/common.hpp"

namespace gridsec {

struct OracleConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 = bind any free port
  bool labels_only = true;
  bool simulate_cadence = false;
  double cadence_seconds = 16.0;
  std::string query_log_path;  // empty = in-memory accounting only
};

struct LedgerSnapshot {
  std::int64_t total_requests = 0;
  std::int64_t total_windows = 0;
  std::map<std::string, std::int64_t> per_client_windows;
  std::string first_timestamp;
  std::string last_timestamp;
};

namespace detail {
inline std::string iso8601_now() {
  using namespace std::chrono;
  auto now = system_clock::now();
  std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  auto ms = duration_cast<milliseconds>(now.time_since_epoch()) % 1000;
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms.count()));
  return out;
}
}  // namespace detail

// Request accounting with monotone counters, persisted as line-delimited
// JSON when a log path is configured.
class QueryLedger {
 public:
  explicit QueryLedger(const std::string& path) {
    if (!path.empty()) {
      log_.open(path, std::ios::app);
      if (!log_) throw std::runtime_error("cannot open file: " + path);
    }
  }

  void record(const std::string& client, std::int64_t windows) {
    std::lock_guard<std::mutex> lock(mu_);
    snap_.total_requests += 1;
    snap_.total_windows += windows;
    snap_.per_client_windows[client] += windows;
    std::string ts = detail::iso8601_now();
    if (snap_.first_timestamp.empty()) snap_.first_timestamp = ts;
    snap_.last_timestamp = ts;
    if (log_.is_open()) {
      nlohmann::json line = {{"ts", ts},
                             {"client", client},
                             {"windows", windows},
                             {"total_requests", snap_.total_requests},
                             {"total_windows", snap_.total_windows}};
      log_ << line.dump() << "\n";
      log_.flush();
    }
  }

  LedgerSnapshot snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return snap_;
  }

 private:
  mutable std::mutex mu_;
  LedgerSnapshot snap_;
  std::ofstream log_;
};

// HTTP service exposing one classifier behind the gray-box boundary.
// Endpoints:  POST /predict {"windows": [[[f64;12]; rows], ...]} and
// GET /health.  With labels_only (the default) responses never carry
// probabilities.  Cadence simulation, when enabled, serializes /predict
// responses so consecutive responses are at least cadence_seconds apart.
class OracleServer {
 public:
  OracleServer(const StabilityClassifier& model, OracleConfig config)
      : model_(model), config_(std::move(config)),
        ledger_(config_.query_log_path) {
    setup_routes();
  }

  ~OracleServer() { stop(); }

  void start() {
    if (config_.port == 0) {
      port_ = server_.bind_to_any_port(config_.host);
      if (port_ < 0)
        throw std::runtime_error("bind failure on " + config_.host);
    } else {
      if (!server_.bind_to_port(config_.host, config_.port))
        throw std::runtime_error("bind failure on " + config_.host + ":" +
                                 std::to_string(config_.port));
      port_ = config_.port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  int port() const { return port_; }
  LedgerSnapshot ledger() const { return ledger_.snapshot(); }

 private:
  void setup_routes() {
    server_.Get("/health", [this](const httplib::Request&,
                                  httplib::Response& res) {
      nlohmann::json body = {{"status", "ok"}, {"model", model_.kind()}};
      res.set_content(body.dump(), "application/json");
    });

    server_.Post("/predict", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      handle_predict(req, res);
    });
  }

  static void fail(httplib::Response& res, int status,
                   const std::string& message) {
    nlohmann::json body = {{"error", message}};
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  // Every request — accepted or rejected — lands in the ledger; rejects
  // count zero scored windows.
  void handle_predict(const httplib::Request& req, httplib::Response& res) {
    std::int64_t scored = 0;
    std::string client = req.remote_addr.empty() ? "unknown" : req.remote_addr;
    predict_impl(req, res, scored);
    ledger_.record(client, scored);
  }

  void predict_impl(const httplib::Request& req, httplib::Response& res,
                    std::int64_t& scored) {
    try {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const std::exception& e) {
        fail(res, 400, std::string("malformed request: ") + e.what());
        return;
      }
      if (!body.is_object() || !body.contains("windows") ||
          !body["windows"].is_array()) {
        fail(res, 400, "malformed request: missing \"windows\" array");
        return;
      }
      const auto& windows = body["windows"];
      if (windows.empty()) {
        fail(res, 400, "empty batch");
        return;
      }

      Eigen::Index n = static_cast<Eigen::Index>(windows.size());
      Eigen::Index rows = -1;
      MatrixXd x;
      for (Eigen::Index w = 0; w < n; ++w) {
        const auto& win = windows[static_cast<std::size_t>(w)];
        if (!win.is_array() || win.empty()) {
          fail(res, 400, "malformed request: window " + std::to_string(w) +
                             " is not a row array");
          return;
        }
        if (rows < 0) {
          rows = static_cast<Eigen::Index>(win.size());
          x.resize(n, rows * kFeatureCount);
        }
        if (static_cast<Eigen::Index>(win.size()) != rows) {
          fail(res, 400, "malformed request: inconsistent window sizes");
          return;
        }
        for (Eigen::Index r = 0; r < rows; ++r) {
          const auto& row = win[static_cast<std::size_t>(r)];
          if (!row.is_array() ||
              static_cast<int>(row.size()) != kFeatureCount) {
            fail(res, 400, "malformed request: each row must hold " +
                               std::to_string(kFeatureCount) + " values");
            return;
          }
          for (int f = 0; f < kFeatureCount; ++f) {
            const auto& cell = row[static_cast<std::size_t>(f)];
            if (!cell.is_number()) {
              fail(res, 400, "malformed request: non-numeric value in window " +
                                 std::to_string(w));
              return;
            }
            x(w, r * kFeatureCount + f) = cell.get<double>();
          }
        }
      }

      VectorXd proba;
      try {
        proba = model_.predict_proba(x);
      } catch (const std::exception& e) {
        fail(res, 400, std::string("malformed batch: ") + e.what());
        return;
      }
      scored = static_cast<std::int64_t>(n);

      nlohmann::json labels = nlohmann::json::array();
      for (Eigen::Index i = 0; i < proba.size(); ++i)
        labels.push_back(
            label_name(proba[i] >= 0.5 ? Label::Stable : Label::Unstable));
      nlohmann::json out = {{"labels", std::move(labels)}};
      if (!config_.labels_only) {
        nlohmann::json probs = nlohmann::json::array();
        for (Eigen::Index i = 0; i < proba.size(); ++i) probs.push_back(proba[i]);
        out["probabilities"] = std::move(probs);
      }

      apply_cadence();
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      fail(res, 500, std::string("internal error: ") + e.what());
    }
  }

  // Hold the response until at least cadence_seconds after the previous
  // response left; responses are serialized while the gate is held.
  void apply_cadence() {
    if (!config_.simulate_cadence) return;
    std::lock_guard<std::mutex> lock(cadence_mu_);
    auto gap = std::chrono::duration<double>(config_.cadence_seconds);
    auto now = std::chrono::steady_clock::now();
    if (has_last_response_) {
      auto release = last_response_ +
                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(gap);
      if (release > now) std::this_thread::sleep_until(release);
    }
    last_response_ = std::chrono::steady_clock::now();
    has_last_response_ = true;
  }

  const StabilityClassifier& model_;
  OracleConfig config_;
  QueryLedger ledger_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::mutex cadence_mu_;
  std::chrono::steady_clock::time_point last_response_;
  bool has_last_response_ = false;
};

// Client side of the boundary; retries once on transient transport failure.
class HttpOracleClient : public PredictionOracle {
 public:
  HttpOracleClient(std::string host, int port)
      : host_(std::move(host)), port_(port) {}

  std::vector<Label> predict_windows(const MatrixXd& windows) override {
    if (windows.rows() == 0) throw std::runtime_error("empty batch");
    if (windows.cols() % kFeatureCount != 0)
      throw std::runtime_error("window width must be a multiple of " +
                               std::to_string(kFeatureCount));
    Eigen::Index rows = windows.cols() / kFeatureCount;

    nlohmann::json batch = nlohmann::json::array();
    for (Eigen::Index w = 0; w < windows.rows(); ++w) {
      nlohmann::json win = nlohmann::json::array();
      for (Eigen::Index r = 0; r < rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int f = 0; f < kFeatureCount; ++f)
          row.push_back(windows(w, r * kFeatureCount + f));
        win.push_back(std::move(row));
      }
      batch.push_back(std::move(win));
    }
    nlohmann::json body = {{"windows", std::move(batch)}};
    nlohmann::json reply = post_json("/predict", body.dump());

    std::vector<Label> labels;
    for (const auto& name : reply.at("labels"))
      labels.push_back(label_from_name(name.get<std::string>()));
    if (static_cast<Eigen::Index>(labels.size()) != windows.rows())
      throw std::runtime_error("oracle returned wrong label count");
    return labels;
  }

  nlohmann::json health() {
    httplib::Client cli(host_, port_);
    cli.set_read_timeout(30, 0);
    auto res = cli.Get("/health");
    if (!res) res = cli.Get("/health");  // one retry
    if (!res)
      throw std::runtime_error("oracle unreachable: " + host_ + ":" +
                               std::to_string(port_));
    return nlohmann::json::parse(res->body);
  }

 private:
  nlohmann::json post_json(const std::string& path, const std::string& body) {
    httplib::Client cli(host_, port_);
    cli.set_read_timeout(120, 0);  // cadence simulation can hold responses
    auto res = cli.Post(path, body, "application/json");
    if (!res) res = cli.Post(path, body, "application/json");  // one retry
    if (!res)
      throw std::runtime_error("oracle unreachable: " + host_ + ":" +
                               std::to_string(port_));
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const std::exception&) {
      throw std::runtime_error("oracle returned unparseable response");
    }
    if (res->status != 200) {
      std::string msg = reply.is_object() && reply.contains("error")
                            ? reply["error"].get<std::string>()
                            : "status " + std::to_string(res->status);
      throw std::runtime_error(msg);
    }
    return reply;
  }

  std::string host_;
  int port_;
};

// In-process adapter for tests and for locally-run attacks: same contract,
// no network hop.
class LocalOracle : public PredictionOracle {
 public:
  explicit LocalOracle(const StabilityClassifier& model) : model_(model) {}

  std::vector<Label> predict_windows(const MatrixXd& windows) override {
    if (windows.rows() == 0) throw std::runtime_error("empty batch");
    return model_.predict(windows);
  }

 private:
  const StabilityClassifier& model_;
};

}  // namespace gridsec
