// SPDX-License-Identifier: Apache-2.0
//
// gridsec: command-line front end for the grid-stability security toolkit.
// Verbs cover the full workflow: prepare-data, train, serve-oracle,
// attack-whitebox, attack-gangrid, analyze, report.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gridsec/harness.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path,
                  "JSON run configuration file (defaults used when omitted)");
  cmd->add_option("--set", args.overrides,
                  "override a config value, e.g. --set gangrid.episodes=10")
      ->take_all();
}

int run_verb(const std::string& verb, const CommonArgs& args) {
  using namespace gridsec;
  nlohmann::json config = load_run_config(args.config_path, args.overrides);
  RunContext ctx = make_run_context(config);
  std::map<std::string, std::unique_ptr<StabilityClassifier>> models;

  if (verb == "prepare-data") {
    Dataset ds = prepare_stage(ctx);
    std::cout << "prepared " << ds.total_windows << " windows (train "
              << ds.train.size() << ", val " << ds.val.size() << ", test "
              << ds.test.size() << "); manifest written to "
              << (ctx.dir / "manifest.json").string() << "\n";
    return 0;
  }
  if (verb == "train") {
    Dataset ds = prepare_stage(ctx);
    train_stage(ctx, ds, models);
    std::cout << "trained " << models.size() << " models; metrics in "
              << (ctx.dir / "metrics.csv").string() << "\n";
    return 0;
  }
  if (verb == "serve-oracle") {
    Dataset ds = prepare_stage(ctx);
    const nlohmann::json& ocfg_json = config.at("oracle");
    std::string kind = ocfg_json.at("model").get<std::string>();
    std::unique_ptr<StabilityClassifier> model = ensure_model(ctx, ds, kind);
    OracleConfig ocfg;
    ocfg.host = ocfg_json.at("host").get<std::string>();
    ocfg.port = ocfg_json.at("port").get<int>();
    ocfg.labels_only = ocfg_json.at("labels_only").get<bool>();
    ocfg.simulate_cadence = ocfg_json.at("simulate_cadence").get<bool>();
    ocfg.cadence_seconds = ocfg_json.at("cadence_seconds").get<double>();
    ocfg.query_log_path = ocfg_json.at("query_log").get<std::string>();
    if (ocfg.query_log_path.empty())
      ocfg.query_log_path = (ctx.dir / "oracle_queries.jsonl").string();
    OracleServer server(*model, ocfg);
    server.start();
    std::cout << "oracle listening on " << ocfg.host << ":" << server.port()
              << " model=" << kind << std::endl;
    std::string port_file = ocfg_json.at("port_file").get<std::string>();
    if (!port_file.empty()) {
      std::ofstream pf(port_file);
      pf << server.port() << "\n";
    }
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_stop.load())
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    LedgerSnapshot snap = server.ledger();
    std::cout << "oracle stopped after " << snap.total_requests
              << " requests / " << snap.total_windows << " windows\n";
    return 0;
  }
  if (verb == "attack-whitebox") {
    Dataset ds = prepare_stage(ctx);
    whitebox_stage(ctx, ds, models);
    std::cout << "whitebox attack results in "
              << (ctx.dir / "attack_results.csv").string() << " and "
              << (ctx.dir / "sweep.csv").string() << "\n";
    return 0;
  }
  if (verb == "attack-gangrid") {
    std::string endpoint =
        config.at("gangrid").at("endpoint").get<std::string>();
    std::vector<GangridStageResult> results;
    if (!endpoint.empty()) {
      // Pure oracle-query mode: no local data or model is touched.
      results = gangrid_stage(ctx, nullptr, nullptr);
    } else {
      Dataset ds = prepare_stage(ctx);
      results = gangrid_stage(ctx, &ds, &models);
    }
    for (const GangridStageResult& r : results)
      std::cout << "model=" << r.model << " converged="
                << (r.train.converged ? "yes" : "no") << " episode="
                << r.train.convergence_episode << " batches="
                << r.train.total_batches << " campaign_s="
                << r.campaign_seconds << " asr=" << r.asr.asr
                << " window_stable_rate=" << r.asr.window_stable_rate << "\n";
    std::cout << "traces in " << (ctx.dir / "traces.jsonl").string()
              << "; summary in "
              << (ctx.dir / "gangrid_summary.json").string() << "\n";
    return 0;
  }
  if (verb == "analyze") {
    Dataset ds = prepare_stage(ctx);
    analyze_stage(ctx, ds, models);
    std::cout << "analysis written to "
              << (ctx.dir / "distribution_report.csv").string() << " and "
              << (ctx.dir / "importance.csv").string() << "\n";
    return 0;
  }
  if (verb == "report") {
    report_stage(ctx);
    std::cout << "report written to " << (ctx.dir / "report.md").string()
              << "\n";
    return 0;
  }
  throw gridsec::ConfigError("unknown verb: " + verb);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grid stability adversarial security toolkit"};
  app.require_subcommand(1);

  const std::vector<std::string> verbs = {
      "prepare-data",  "train",          "serve-oracle", "attack-whitebox",
      "attack-gangrid", "analyze",       "report"};
  const std::vector<std::string> descriptions = {
      "load or simulate telemetry, window and split it, write the manifest",
      "train every configured model and emit metrics.csv",
      "serve a trained model over HTTP until interrupted",
      "run FGSM/BIM/PGD/noise attacks and the epsilon sweep",
      "run the oracle-only generative attack and emit traces",
      "distribution comparison and permutation importance",
      "assemble report.md from run artifacts"};

  std::vector<CommonArgs> verb_args(verbs.size());
  for (std::size_t i = 0; i < verbs.size(); ++i) {
    CLI::App* cmd = app.add_subcommand(verbs[i], descriptions[i]);
    add_common(cmd, verb_args[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a configuration error
  }

  try {
    for (std::size_t i = 0; i < verbs.size(); ++i)
      if (app.got_subcommand(verbs[i])) return run_verb(verbs[i], verb_args[i]);
    std::cerr << "error: no verb given\n";
    return 2;
  } catch (const gridsec::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
