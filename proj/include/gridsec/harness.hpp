// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridsec/attacks.hpp"
#include "gridsec/csv.hpp"
#include "gridsec/dataset.hpp"
#include "gridsec/gangrid.hpp"
#include "gridsec/models.hpp"
#include "gridsec/oracle.hpp"
#include "gridsec/simulate.hpp"
#include "gridsec/stats.hpp"

namespace gridsec {

// ---------------------------------------------------------------------------
// Run configuration: one JSON document, dotted-path overrides, strict keys.
// ---------------------------------------------------------------------------

inline nlohmann::json default_run_config() {
  return nlohmann::json{
      {"output_dir", "runs/demo"},
      {"dataset",
       {{"path", ""},
        {"simulate_rows", 10000},
        {"simulate_seed", 7},
        {"augment", true},
        {"window_rows", kDefaultWindowRows},
        {"window_step", kDefaultWindowStep},
        {"ratio_train", 0.75},
        {"ratio_val", 0.05},
        {"ratio_test", 0.20},
        {"split_seed", 1234},
        {"allow_empty", false}}},
      {"models",
       {{"kinds",
         {"gbdt", "leafwise-gbdt", "decision-tree", "extra-trees",
          "random-forest", "knn", "bilstm"}},
        {"train_seed", 42}}},
      {"oracle",
       {{"host", "127.0.0.1"},
        {"port", 0},
        {"labels_only", true},
        {"simulate_cadence", false},
        {"cadence_seconds", 16.0},
        {"model", "bilstm"},
        {"query_log", ""},
        {"port_file", ""}}},
      {"whitebox",
       {{"models", {"bilstm", "gbdt"}},
        {"epsilon", 0.5},
        {"iterations", 10},
        {"step_size", 0.0},
        {"random_start", true},
        {"noise_attempts", 50},
        {"seed", 5},
        {"eval_windows", 400},
        {"sweep", true},
        {"sweep_eval_windows", 200}}},
      {"gangrid",
       {{"models", {"bilstm", "gbdt"}},
        {"endpoint", ""},
        {"latent_dim", 64},
        {"episodes", 50},
        {"max_episode_length", 10},
        {"gamma", 0.99},
        {"alpha", 0.1},
        {"batch_size", 32},
        {"convergence_threshold", 0.95},
        {"probe_batches", 20},
        {"multiplicative_update", false},
        {"random_targets", false},
        {"inner_steps", 200},
        {"generator_lr", 0.01},
        {"seed", 99},
        {"sample_seed", 2024}}},
      {"analysis",
       {{"importance_models", {"gbdt", "bilstm"}},
        {"repeats", 5},
        {"seed", 17}}}};
}

namespace detail {
inline void check_known_keys(const nlohmann::json& given,
                             const nlohmann::json& schema,
                             const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key()))
      throw ConfigError("unknown config key: " + path);
    if (it->is_object() && schema[it.key()].is_object())
      check_known_keys(*it, schema[it.key()], path);
  }
}
}  // namespace detail

// Loads config (defaults <- file <- --set overrides, later wins).
inline nlohmann::json load_run_config(
    const std::string& config_path,
    const std::vector<std::string>& overrides) {
  nlohmann::json cfg = default_run_config();

  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file: " + config_path);
    nlohmann::json file_cfg;
    try {
      file_cfg = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
      throw ConfigError("config parse error in " + config_path + ": " +
                        e.what());
    }
    detail::check_known_keys(file_cfg, cfg, "");
    cfg.merge_patch(file_cfg);
  }

  for (const std::string& kv : overrides) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must look like key.path=value: " + kv);
    std::string path = kv.substr(0, eq);
    std::string raw = kv.substr(eq + 1);

    nlohmann::json* node = &cfg;
    std::size_t start = 0;
    std::vector<std::string> parts;
    while (start <= path.size()) {
      std::size_t dot = path.find('.', start);
      if (dot == std::string::npos) {
        parts.push_back(path.substr(start));
        break;
      }
      parts.push_back(path.substr(start, dot - start));
      start = dot + 1;
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object())
        throw ConfigError("unknown config key: " + path);
      node = &(*node)[parts[i]];
    }
    const std::string& leaf = parts.back();
    if (!node->contains(leaf))
      throw ConfigError("unknown config key: " + path);

    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const std::exception&) {
      value = raw;  // bare strings allowed without quotes
    }
    (*node)[leaf] = value;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Stage plumbing.
// ---------------------------------------------------------------------------

struct RunContext {
  nlohmann::json config;
  std::filesystem::path dir;

  std::filesystem::path models_dir() const { return dir / "models"; }
  std::filesystem::path model_stem(const std::string& kind) const {
    return models_dir() / kind;
  }
};

inline RunContext make_run_context(const nlohmann::json& config) {
  RunContext ctx;
  ctx.config = config;
  ctx.dir = config.at("output_dir").get<std::string>();
  std::filesystem::create_directories(ctx.dir);
  std::filesystem::create_directories(ctx.models_dir());
  std::ofstream snap(ctx.dir / "config.json");
  if (!snap)
    throw std::runtime_error("cannot write file: " +
                             (ctx.dir / "config.json").string());
  snap << config.dump(2) << "\n";
  return ctx;
}

inline std::vector<GridRecord> load_or_simulate_records(
    const nlohmann::json& dcfg) {
  std::string path = dcfg.at("path").get<std::string>();
  if (!path.empty()) return load_records(path);
  SimulatorConfig sim;
  sim.rows = dcfg.at("simulate_rows").get<std::int64_t>();
  sim.seed = dcfg.at("simulate_seed").get<std::uint64_t>();
  return simulate_telemetry(sim);
}

inline Dataset prepare_stage(const RunContext& ctx) {
  const nlohmann::json& dcfg = ctx.config.at("dataset");
  std::vector<GridRecord> records = load_or_simulate_records(dcfg);
  PrepareOptions opts;
  opts.augment = dcfg.at("augment").get<bool>();
  opts.window_rows = dcfg.at("window_rows").get<int>();
  opts.window_step = dcfg.at("window_step").get<int>();
  opts.ratio_train = dcfg.at("ratio_train").get<double>();
  opts.ratio_val = dcfg.at("ratio_val").get<double>();
  opts.ratio_test = dcfg.at("ratio_test").get<double>();
  opts.split_seed = dcfg.at("split_seed").get<std::uint64_t>();
  opts.allow_empty = dcfg.at("allow_empty").get<bool>();
  Dataset ds = prepare_dataset(records, opts);
  ds.save_manifest((ctx.dir / "manifest.json").string());
  return ds;
}

// Loads a saved artifact when present, otherwise trains and saves one.
inline std::unique_ptr<StabilityClassifier> ensure_model(
    const RunContext& ctx, const Dataset& ds, const std::string& kind) {
  std::string stem = ctx.model_stem(kind).string();
  if (std::filesystem::exists(stem + ".gsm") &&
      std::filesystem::exists(stem + ".json"))
    return load_model(stem);

  std::unique_ptr<StabilityClassifier> model = make_classifier(kind);
  std::uint64_t base_seed =
      ctx.config.at("models").at("train_seed").get<std::uint64_t>();
  // Per-kind deterministic seed: stable across runs, distinct across kinds.
  std::uint64_t kind_index = 0;
  for (std::size_t i = 0; i < kModelKinds.size(); ++i)
    if (kind == kModelKinds[i]) kind_index = i;
  model->train(ds.train, ds.val, Rng::derive(base_seed, kind_index));
  model->normalization = ds.normalizer.to_json();
  EvalReport val_rep = model->evaluate(ds.val);
  EvalReport test_rep = model->evaluate(ds.test);
  model->metrics_snapshot["val_accuracy"] = val_rep.accuracy();
  model->metrics_snapshot["test_accuracy"] = test_rep.accuracy();
  save_model(*model, stem);
  return model;
}

inline void train_stage(
    const RunContext& ctx, const Dataset& ds,
    std::map<std::string, std::unique_ptr<StabilityClassifier>>& models) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& kind_json : ctx.config.at("models").at("kinds")) {
    std::string kind = kind_json.get<std::string>();
    std::unique_ptr<StabilityClassifier> model = ensure_model(ctx, ds, kind);
    EvalReport rep = model->evaluate(ds.test);
    rows.push_back({kind, csv_number(rep.accuracy()),
                    csv_number(rep.precision()), csv_number(rep.recall()),
                    csv_number(rep.f1())});
    models[kind] = std::move(model);
  }
  write_csv((ctx.dir / "metrics.csv").string(),
            {"model", "accuracy", "precision", "recall", "f1"}, rows);
}

// Expands de-normalized windows to dataset-schema records.  Synthetic rows
// carry stab = 0 (no simulation ground truth) and the given label.
inline std::vector<GridRecord> windows_as_records(
    const MatrixXd& denormalized_windows, const std::vector<Label>& labels) {
  MatrixXd rows = windows_to_rows(denormalized_windows);
  Eigen::Index per_window = rows.rows() / denormalized_windows.rows();
  std::vector<GridRecord> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    GridRecord rec{};
    for (int f = 0; f < kFeatureCount; ++f) rec.set_feature(f, rows(i, f));
    rec.stab = 0.0;
    rec.stabf = labels[static_cast<std::size_t>(i / per_window)];
    out.push_back(rec);
  }
  return out;
}

inline void write_adversarial_csv(const std::string& path,
                                  const AdversarialBatch& batch,
                                  const Normalizer& normalizer,
                                  const std::vector<Label>& truth) {
  MatrixXd denorm = denormalize_windows(batch.perturbed, normalizer);
  std::vector<std::string> header;
  for (const auto& name : kFeatureNames) header.push_back(name);
  header.insert(header.end(), {"stab", "stabf", "success"});
  std::vector<std::vector<std::string>> rows;
  Eigen::Index per_window = denorm.cols() / kFeatureCount;
  MatrixXd flat = windows_to_rows(denorm);
  for (Eigen::Index i = 0; i < flat.rows(); ++i) {
    Eigen::Index w = i / per_window;
    std::vector<std::string> row;
    for (int f = 0; f < kFeatureCount; ++f)
      row.push_back(csv_number(flat(i, f)));
    row.push_back(csv_number(0.0));
    row.push_back(label_name(truth[static_cast<std::size_t>(w)]));
    row.push_back(batch.success[static_cast<std::size_t>(w)] ? "1" : "0");
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

inline void whitebox_stage(
    const RunContext& ctx, const Dataset& ds,
    std::map<std::string, std::unique_ptr<StabilityClassifier>>& models) {
  const nlohmann::json& wcfg = ctx.config.at("whitebox");
  AttackConfig base;
  base.epsilon = wcfg.at("epsilon").get<double>();
  base.iterations = wcfg.at("iterations").get<int>();
  base.step_size = wcfg.at("step_size").get<double>();
  base.random_start = wcfg.at("random_start").get<bool>();
  base.noise_attempts = wcfg.at("noise_attempts").get<int>();
  base.seed = wcfg.at("seed").get<std::uint64_t>();
  base.validate();

  Eigen::Index eval_n = std::min<Eigen::Index>(
      wcfg.at("eval_windows").get<int>(), ds.test.x.rows());
  MatrixXd x = ds.test.x.topRows(eval_n);
  std::vector<Label> y(ds.test.y.begin(), ds.test.y.begin() + eval_n);

  std::vector<std::vector<std::string>> results;
  std::vector<std::vector<std::string>> sweep_rows;

  for (const auto& kind_json : wcfg.at("models")) {
    std::string kind = kind_json.get<std::string>();
    if (!models.count(kind)) models[kind] = ensure_model(ctx, ds, kind);
    const StabilityClassifier& model = *models.at(kind);

    EvalReport clean = evaluate_labels(model.predict(x), y);
    auto emit = [&](const std::string& attack, double eps,
                    const AdversarialBatch& batch) {
      double succ = 0.0;
      for (bool s : batch.success) succ += s ? 1.0 : 0.0;
      succ /= static_cast<double>(batch.success.size());
      results.push_back({kind, attack, csv_number(eps),
                         csv_number(clean.accuracy()),
                         csv_number(batch.post_attack_accuracy),
                         csv_number(succ)});
    };

    if (model.differentiable()) {
      AdversarialBatch f = fgsm(model, x, y, base.epsilon);
      emit("fgsm", base.epsilon, f);
      write_adversarial_csv(
          (ctx.dir / ("adversarial_fgsm_" + kind + ".csv")).string(), f,
          ds.normalizer, y);
      emit("bim", base.epsilon, bim(model, x, y, base));
      emit("pgd", base.epsilon, pgd(model, x, y, base));
    }
    AdversarialBatch noise = random_noise_attack(model, x, y, base.epsilon,
                                                 base.noise_attempts,
                                                 base.seed);
    emit("noise", base.epsilon, noise);

    if (wcfg.at("sweep").get<bool>()) {
      Eigen::Index sweep_n = std::min<Eigen::Index>(
          wcfg.at("sweep_eval_windows").get<int>(), ds.test.x.rows());
      MatrixXd sx = ds.test.x.topRows(sweep_n);
      std::vector<Label> sy(ds.test.y.begin(), ds.test.y.begin() + sweep_n);
      std::vector<std::string> attacks;
      if (model.differentiable()) attacks.push_back("fgsm");
      attacks.push_back("noise");
      for (const std::string& attack : attacks) {
        std::vector<SweepPoint> curve = epsilon_sweep(
            model, attack, default_sweep_epsilons(), sx, sy, base);
        for (const SweepPoint& p : curve)
          sweep_rows.push_back({csv_number(p.epsilon), p.attack, p.model,
                                csv_number(p.accuracy)});
      }
    }
  }

  write_csv((ctx.dir / "attack_results.csv").string(),
            {"model", "attack", "epsilon", "clean_accuracy",
             "post_attack_accuracy", "success_rate"},
            results);
  write_csv((ctx.dir / "sweep.csv").string(),
            {"epsilon", "attack", "model", "accuracy"}, sweep_rows);
}

struct GangridStageResult {
  std::string model;
  GanGridResult train;
  ASRResult asr;
  double campaign_seconds = 0.0;
  double measured_seconds = 0.0;
  LedgerSnapshot ledger;
};

inline RLConfig rl_config_from_json(const nlohmann::json& gcfg) {
  RLConfig rl;
  rl.episodes = gcfg.at("episodes").get<int>();
  rl.max_episode_length = gcfg.at("max_episode_length").get<int>();
  rl.gamma = gcfg.at("gamma").get<double>();
  rl.alpha = gcfg.at("alpha").get<double>();
  rl.batch_size = gcfg.at("batch_size").get<int>();
  rl.convergence_threshold = gcfg.at("convergence_threshold").get<double>();
  rl.probe_batches = gcfg.at("probe_batches").get<int>();
  rl.multiplicative_update = gcfg.at("multiplicative_update").get<bool>();
  rl.random_targets = gcfg.at("random_targets").get<bool>();
  rl.inner_steps = gcfg.at("inner_steps").get<int>();
  rl.generator_lr = gcfg.at("generator_lr").get<double>();
  rl.seed = gcfg.at("seed").get<std::uint64_t>();
  rl.validate();
  return rl;
}

// Runs the generative attack against one served model over loopback HTTP
// (or an external endpoint), streams traces, evaluates ASR on a volley of
// fresh batches, and exports the generated sample for distribution analysis.
// `ds` may be null in endpoint mode: the attack itself never touches local
// data, and the export then stays in normalized units.
inline GangridStageResult gangrid_attack_one(
    const RunContext& ctx, const Dataset* ds, const std::string& kind,
    const StabilityClassifier* model, std::ofstream& traces_out) {
  const nlohmann::json& gcfg = ctx.config.at("gangrid");
  RLConfig rl = rl_config_from_json(gcfg);
  int latent_dim = gcfg.at("latent_dim").get<int>();
  std::string endpoint = gcfg.at("endpoint").get<std::string>();

  std::unique_ptr<OracleServer> server;
  std::string host;
  int port = 0;
  if (endpoint.empty()) {
    if (!model) throw std::runtime_error("no model available for oracle");
    OracleConfig ocfg;
    ocfg.query_log_path =
        (ctx.dir / ("oracle_queries_" + kind + ".jsonl")).string();
    server = std::make_unique<OracleServer>(*model, ocfg);
    server->start();
    host = "127.0.0.1";
    port = server->port();
  } else {
    std::size_t colon = endpoint.rfind(':');
    if (colon == std::string::npos)
      throw ConfigError("endpoint must look like host:port: " + endpoint);
    host = endpoint.substr(0, colon);
    port = std::stoi(endpoint.substr(colon + 1));
  }

  HttpOracleClient client(host, port);
  Generator generator(latent_dim,
                      ctx.config.at("dataset").at("window_rows").get<int>(),
                      rl.seed);

  GangridStageResult out;
  out.model = kind;
  auto sink = [&](const EpisodeTrace& trace) {
    for (auto line : trace.step_lines()) {
      line["model"] = kind;
      traces_out << line.dump() << "\n";
    }
    traces_out.flush();
  };

  auto t0 = std::chrono::steady_clock::now();
  out.train = train_gangrid(generator, client, rl, sink);
  auto t1 = std::chrono::steady_clock::now();
  out.measured_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.campaign_seconds = estimate_campaign_seconds(out.train.total_batches);

  // Volley sized to the test set when data is at hand, probe-sized otherwise.
  int volley = rl.probe_batches;
  if (ds)
    volley = static_cast<int>(
        (ds->test.x.rows() + rl.batch_size - 1) / rl.batch_size);
  std::vector<MatrixXd> batches = generate_batches(
      generator, volley, rl.batch_size,
      gcfg.at("sample_seed").get<std::uint64_t>());
  std::vector<std::vector<Label>> batch_labels;
  for (const MatrixXd& b : batches)
    batch_labels.push_back(client.predict_windows(b));
  out.asr = compute_asr(batch_labels);

  // Export the generated sample for distribution analysis.
  std::vector<std::string> header;
  for (const auto& name : kFeatureNames) header.push_back(name);
  header.insert(header.end(), {"stab", "stabf"});
  std::vector<std::vector<std::string>> rows;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    MatrixXd windows =
        ds ? denormalize_windows(batches[b], ds->normalizer) : batches[b];
    std::vector<GridRecord> recs = windows_as_records(windows, batch_labels[b]);
    for (const GridRecord& rec : recs) {
      std::vector<std::string> row;
      for (int f = 0; f < kFeatureCount; ++f)
        row.push_back(csv_number(rec.feature(f)));
      row.push_back(csv_number(rec.stab));
      row.push_back(label_name(rec.stabf));
      rows.push_back(std::move(row));
    }
  }
  write_csv((ctx.dir / ("generated_records_" + kind + ".csv")).string(),
            header, rows);

  if (server) {
    out.ledger = server->ledger();
    server->stop();
  }
  return out;
}

inline void write_gangrid_summary(const RunContext& ctx,
                                  const std::vector<GangridStageResult>& rs) {
  nlohmann::json summary = nlohmann::json::array();
  for (const GangridStageResult& r : rs)
    summary.push_back(
        {{"model", r.model},
         {"converged", r.train.converged},
         {"convergence_episode", r.train.convergence_episode},
         {"episodes_run", static_cast<int>(r.train.traces.size())},
         {"total_batches", r.train.total_batches},
         {"campaign_seconds_estimate", r.campaign_seconds},
         {"measured_training_seconds", r.measured_seconds},
         {"asr", r.asr.asr},
         {"batches_sent", r.asr.batches_sent},
         {"batches_fooling", r.asr.batches_fooling},
         {"window_stable_rate", r.asr.window_stable_rate},
         {"oracle_requests", r.ledger.total_requests},
         {"oracle_windows", r.ledger.total_windows}});
  std::ofstream sum(ctx.dir / "gangrid_summary.json");
  if (!sum)
    throw std::runtime_error("cannot write file: " +
                             (ctx.dir / "gangrid_summary.json").string());
  sum << summary.dump(2) << "\n";
}

// ds may be null only when gangrid.endpoint is set (pure remote mode).
inline std::vector<GangridStageResult> gangrid_stage(
    const RunContext& ctx, const Dataset* ds,
    std::map<std::string, std::unique_ptr<StabilityClassifier>>* models) {
  const nlohmann::json& gcfg = ctx.config.at("gangrid");
  std::string endpoint = gcfg.at("endpoint").get<std::string>();
  std::ofstream traces(ctx.dir / "traces.jsonl");
  if (!traces)
    throw std::runtime_error("cannot write file: " +
                             (ctx.dir / "traces.jsonl").string());

  std::vector<GangridStageResult> results;
  if (!endpoint.empty()) {
    // Remote oracle: the served model self-identifies via /health.
    std::size_t colon = endpoint.rfind(':');
    if (colon == std::string::npos)
      throw ConfigError("endpoint must look like host:port: " + endpoint);
    HttpOracleClient probe(endpoint.substr(0, colon),
                           std::stoi(endpoint.substr(colon + 1)));
    std::string kind = probe.health().at("model").get<std::string>();
    results.push_back(gangrid_attack_one(ctx, ds, kind, nullptr, traces));
  } else {
    if (!ds || !models)
      throw std::runtime_error("no dataset available for local oracle");
    for (const auto& kind_json : gcfg.at("models")) {
      std::string kind = kind_json.get<std::string>();
      if (!models->count(kind)) (*models)[kind] = ensure_model(ctx, *ds, kind);
      results.push_back(
          gangrid_attack_one(ctx, ds, kind, models->at(kind).get(), traces));
    }
  }
  write_gangrid_summary(ctx, results);
  return results;
}

inline MatrixXd records_to_rows(const std::vector<GridRecord>& records) {
  MatrixXd rows(static_cast<Eigen::Index>(records.size()), kFeatureCount);
  for (std::size_t i = 0; i < records.size(); ++i)
    for (int f = 0; f < kFeatureCount; ++f)
      rows(static_cast<Eigen::Index>(i), f) = records[i].feature(f);
  return rows;
}

inline void analyze_stage(
    const RunContext& ctx, const Dataset& ds,
    std::map<std::string, std::unique_ptr<StabilityClassifier>>& models) {
  const nlohmann::json& acfg = ctx.config.at("analysis");

  // Real sample: de-normalized test windows flattened back to rows.
  MatrixXd real_rows =
      windows_to_rows(denormalize_windows(ds.test.x, ds.normalizer));

  std::vector<std::vector<std::string>> report_rows;
  std::vector<std::vector<std::string>> curve_rows;

  for (const auto& kind_json : ctx.config.at("gangrid").at("models")) {
    std::string kind = kind_json.get<std::string>();
    std::filesystem::path gen_path =
        ctx.dir / ("generated_records_" + kind + ".csv");
    if (!std::filesystem::exists(gen_path))
      throw std::runtime_error("missing generated sample " +
                               gen_path.string() +
                               "; run attack-gangrid first");
    std::vector<GridRecord> generated = load_records(gen_path.string());
    DistributionReport report =
        distribution_compare(real_rows, records_to_rows(generated));
    for (const FeatureDistribution& fd : report.features) {
      report_rows.push_back({kind, fd.feature, csv_number(fd.ks),
                             csv_number(fd.median_real),
                             csv_number(fd.median_generated),
                             std::to_string(fd.median_shift_sign)});
      for (std::size_t g = 0; g < fd.grid.size(); ++g)
        curve_rows.push_back({kind, fd.feature, csv_number(fd.grid[g]),
                              csv_number(fd.cdf_real[g]),
                              csv_number(fd.cdf_generated[g])});
    }
  }
  write_csv((ctx.dir / "distribution_report.csv").string(),
            {"model", "feature", "ks", "median_real", "median_generated",
             "median_shift_sign"},
            report_rows);
  write_csv((ctx.dir / "cdf_curves.csv").string(),
            {"model", "feature", "value", "cdf_real", "cdf_generated"},
            curve_rows);

  std::vector<std::vector<std::string>> importance_rows;
  for (const auto& kind_json : acfg.at("importance_models")) {
    std::string kind = kind_json.get<std::string>();
    if (!models.count(kind)) models[kind] = ensure_model(ctx, ds, kind);
    std::vector<GroupImportance> ranked = permutation_importance(
        *models.at(kind), ds.test, acfg.at("repeats").get<int>(),
        acfg.at("seed").get<std::uint64_t>());
    for (std::size_t r = 0; r < ranked.size(); ++r)
      importance_rows.push_back({kind, ranked[r].group,
                                 csv_number(ranked[r].mean_accuracy_drop),
                                 std::to_string(r + 1)});
  }
  write_csv((ctx.dir / "importance.csv").string(),
            {"model", "group", "mean_accuracy_drop", "rank"},
            importance_rows);
}

inline void report_stage(const RunContext& ctx) {
  std::ofstream out(ctx.dir / "report.md");
  if (!out)
    throw std::runtime_error("cannot write file: " +
                             (ctx.dir / "report.md").string());
  out << "# Run report\n\n";
  auto embed = [&](const std::string& title, const std::string& file) {
    std::filesystem::path p = ctx.dir / file;
    if (!std::filesystem::exists(p)) return;
    out << "## " << title << "\n\n```\n";
    std::ifstream in(p);
    std::string line;
    int count = 0;
    while (std::getline(in, line) && count++ < 60) out << line << "\n";
    out << "```\n\n";
  };
  embed("Baseline metrics", "metrics.csv");
  embed("Whitebox attacks", "attack_results.csv");
  embed("Generative attack", "gangrid_summary.json");
  embed("Distribution shift", "distribution_report.csv");
  embed("Permutation importance", "importance.csv");
  out << "Full sweep data in sweep.csv; episode traces in traces.jsonl; "
         "CDF curves in cdf_curves.csv.\n";
}

// Sequential end-to-end pipeline; stage failures abort with the stage name
// while earlier artifacts stay on disk.
inline void run_pipeline(const nlohmann::json& config) {
  RunContext ctx = make_run_context(config);
  std::map<std::string, std::unique_ptr<StabilityClassifier>> models;
  Dataset ds;
  struct Stage {
    const char* name;
    std::function<void()> fn;
  };
  std::vector<Stage> stages = {
      {"prepare-data", [&] { ds = prepare_stage(ctx); }},
      {"train", [&] { train_stage(ctx, ds, models); }},
      {"attack-whitebox", [&] { whitebox_stage(ctx, ds, models); }},
      {"attack-gangrid", [&] { gangrid_stage(ctx, &ds, &models); }},
      {"analyze", [&] { analyze_stage(ctx, ds, models); }},
      {"report", [&] { report_stage(ctx); }}};
  for (const Stage& stage : stages) {
    try {
      stage.fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error("stage " + std::string(stage.name) +
                               " failed: " + e.what());
    }
  }
}

}  // namespace gridsec
