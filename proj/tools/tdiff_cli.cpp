#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tdiff/error.hpp"
#include "tdiff/estimators.hpp"
#include "tdiff/gof.hpp"
#include "tdiff/harness.hpp"
#include "tdiff/likelihood.hpp"
#include "tdiff/path.hpp"
#include "tdiff/serialize.hpp"
#include "tdiff/simulate.hpp"

namespace {

using tdiff::Json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBreach = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  std::optional<std::string> tables;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "experiment config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_option("--workers", f.workers, "worker threads, 0 for all cores");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--tables", f.tables, "quantile table directory");
}

Json read_json(const std::string& file) {
  std::ifstream in(file);
  if (!in) tdiff::fail(tdiff::ErrorKind::ConfigError, "cannot open config " + file);
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    tdiff::fail(tdiff::ErrorKind::ConfigError, file + ": " + e.what());
  }
}

// Loads the config, applies flag overrides and checks the kind against the
// subcommand. An absent kind takes the subcommand's.
tdiff::ExperimentConfig prepare(const CommonFlags& f, std::optional<tdiff::ExperimentKind> expected) {
  Json j = f.config.empty() ? Json::object() : read_json(f.config);
  if (!j.is_object()) tdiff::fail(tdiff::ErrorKind::ConfigError, "config: expected a JSON object");
  if (expected) {
    const std::string want(tdiff::to_string(*expected));
    if (!j.contains("kind")) {
      j["kind"] = want;
    } else {
      const auto got = j.at("kind").is_string() ? tdiff::experiment_kind_from_string(j.at("kind").get<std::string>())
                                                : std::nullopt;
      if (got != expected) tdiff::fail(tdiff::ErrorKind::ConfigError, "kind: this subcommand runs '" + want + "'");
    }
  }
  if (f.seed) j["seed"] = *f.seed;
  if (f.workers) j["workers"] = *f.workers;
  if (f.out) j["out"] = *f.out;
  if (f.tables) j["tables"] = *f.tables;
  return tdiff::parse_config(j);
}

int run_and_write(const tdiff::ExperimentConfig& cfg) {
  const auto report = tdiff::run_experiment(cfg);
  tdiff::write_report(report, cfg.out_dir);
  std::printf("%s: %zu records, %zu failures (%.1f%%), %.1fs -> %s\n", report.kind.c_str(), report.records.size(),
              report.failures, 100.0 * report.failure_rate(), report.seconds, cfg.out_dir.c_str());
  if (report.failure_breach) {
    std::fprintf(stderr, "failure rate %.3f exceeds %.3f\n", report.failure_rate(), cfg.max_failure_rate);
    return kExitBreach;
  }
  return kExitOk;
}

int cmd_simulate(const CommonFlags& f, std::uint64_t stream) {
  const Json j = read_json(f.config);
  const auto model = tdiff::model_from_json(j.value("model", Json()), "model");
  double T = 0.0;
  if (j.contains("duration")) {
    T = tdiff::require_number(j, "duration", "config");
  } else if (j.contains("durations") && j.at("durations").is_array() && !j.at("durations").empty() &&
             j.at("durations")[0].is_number()) {
    T = j.at("durations")[0].get<double>();
  } else {
    tdiff::fail(tdiff::ErrorKind::ConfigError, "duration: missing");
  }
  const double dt = tdiff::number_or(j, "dt", 1e-3, "config");
  if (!(dt > 0.0) || T < dt) tdiff::fail(tdiff::ErrorKind::ConfigError, "dt: needs 0 < dt <= duration");
  const auto init = j.contains("init") ? tdiff::init_from_json(j.at("init")) : tdiff::InitRule::stationary();
  const std::uint64_t seed = f.seed ? *f.seed : static_cast<std::uint64_t>(tdiff::number_or(j, "seed", 1.0, "config"));
  const auto path = tdiff::simulate_path(model, T, dt, tdiff::RngStream{seed, stream}, init);
  const std::string dir = f.out.value_or(j.value("out", std::string("out")));
  std::filesystem::create_directories(dir);
  tdiff::write_path_csv(path, dir + "/path.csv");
  std::printf("%zu steps, dt=%g, seed=%llu, stream=%llu -> %s/path.csv\n", path.steps(), path.dt,
              static_cast<unsigned long long>(seed), static_cast<unsigned long long>(stream), dir.c_str());
  return kExitOk;
}

int cmd_estimate(const CommonFlags& f, const std::string& path_file) {
  const Json j = read_json(f.config);
  const auto model = tdiff::model_from_json(j.value("model", Json()), "model");
  const auto box = tdiff::box_from_json(j.value("box", Json()), "box");
  std::vector<std::string> names{"mle"};
  if (j.contains("estimators")) names = j.at("estimators").get<std::vector<std::string>>();
  const auto path = tdiff::read_path_csv(path_file);
  const std::string dir = f.out.value_or("out");
  std::filesystem::create_directories(dir);
  Json out = Json::array();
  for (const auto& name : names) {
    tdiff::ThresholdEstimate est;
    if (name == "mle" || name == "MLE") {
      est = tdiff::mle_threshold(path, model, box);
      for (std::size_t k = 0; k < model.num_thresholds(); ++k) {
        tdiff::write_curve_csv(tdiff::loglik_curve(path, model, k, box[k]),
                               dir + "/curve_" + std::to_string(k + 1) + ".csv");
      }
    } else if (name == "bayes" || name == "Bayes") {
      est = tdiff::bayes_threshold(path, model, box);
    } else if (name == "profile" || name == "two-stage") {
      const auto sigma = model.constant_sigma();
      if (!sigma) tdiff::fail(tdiff::ErrorKind::ConfigError, "model: joint estimation needs constant sigma");
      est = name == "profile" ? tdiff::joint_estimate_tou3(path, *sigma, box)
                              : tdiff::two_stage_estimate(path, *sigma, box);
    } else {
      tdiff::fail(tdiff::ErrorKind::ConfigError, "estimators: unknown estimator '" + name + "'");
    }
    est.seed = path.seed;
    est.stream = path.stream;
    est.model = model.describe();
    out.push_back(tdiff::estimate_to_json(est));
  }
  std::ofstream(dir + "/estimate.json") << out.dump(2) << "\n";
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_gof_single(const CommonFlags& f, const std::string& path_file) {
  const Json j = read_json(f.config);
  const auto model = tdiff::model_from_json(j.value("model", Json()), "model");
  const std::string tables = f.tables.value_or(j.value("tables", std::string("data/tables")));
  const double alpha = tdiff::number_or(j, "alpha", 0.05, "config");
  std::vector<std::string> stats{"W2"};
  if (j.contains("statistics")) stats = j.at("statistics").get<std::vector<std::string>>();
  const bool composite = j.value("composite", false);
  const auto path = tdiff::read_path_csv(path_file);
  Json out = Json::array();
  for (const auto& name : stats) {
    const auto stat = tdiff::statistic_from_string(name);
    if (!stat) tdiff::fail(tdiff::ErrorKind::ConfigError, "statistics: unknown statistic '" + name + "'");
    const auto table = tdiff::read_quantile_table(tables, tdiff::null_law(*stat));
    const auto report =
        composite ? tdiff::composite_test(path, model, tdiff::box_from_json(j.value("box", Json()), "box"), alpha,
                                          *stat, table)
                  : tdiff::simple_test(path, model, *stat, alpha, table);
    out.push_back(tdiff::gof_report_to_json(report));
  }
  std::cout << out.dump(2) << "\n";
  if (f.out) {
    std::filesystem::create_directories(*f.out);
    std::ofstream(*f.out + "/gof.json") << out.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Threshold diffusion estimation, limit laws and goodness-of-fit experiments"};
  app.require_subcommand(1);

  CommonFlags sim_f, est_f, law_f, tab_f, gof_f, mis_f, exp_f;
  std::uint64_t stream = 0;
  std::string est_path, gof_path;

  auto* sim = app.add_subcommand("simulate", "simulate one path to CSV");
  add_common(sim, sim_f, true);
  sim->add_option("--stream", stream, "replicate stream index");

  auto* est = app.add_subcommand("estimate", "estimate thresholds from a path CSV");
  add_common(est, est_f, true);
  est->add_option("--path", est_path, "path CSV (t,x)")->required();

  auto* law = app.add_subcommand("limit-law", "sample the limit functionals");
  add_common(law, law_f, false);
  auto* tab = app.add_subcommand("tables", "build quantile tables");
  add_common(tab, tab_f, false);
  auto* gof = app.add_subcommand("gof", "goodness-of-fit test on a path or a batch experiment");
  add_common(gof, gof_f, true);
  gof->add_option("--path", gof_path, "test a single path CSV instead of running replicates");
  auto* mis = app.add_subcommand("misspec", "misspecification sweep");
  add_common(mis, mis_f, true);
  auto* exp = app.add_subcommand("experiment", "run any experiment config");
  add_common(exp, exp_f, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_f, stream);
    if (*est) return cmd_estimate(est_f, est_path);
    if (*law) return run_and_write(prepare(law_f, tdiff::ExperimentKind::LimitLaw));
    if (*tab) {
      const auto cfg = prepare(tab_f, tdiff::ExperimentKind::Tables);
      const int code = run_and_write(cfg);
      std::printf("tables written to %s\n", cfg.tables_dir.c_str());
      return code;
    }
    if (*gof) {
      if (!gof_path.empty()) return cmd_gof_single(gof_f, gof_path);
      return run_and_write(prepare(gof_f, tdiff::ExperimentKind::Gof));
    }
    if (*mis) return run_and_write(prepare(mis_f, tdiff::ExperimentKind::Misspec));
    if (*exp) return run_and_write(prepare(exp_f, std::nullopt));
  } catch (const tdiff::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == tdiff::ErrorKind::ConfigError ? kExitConfig : kExitFailure;
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitOk;
}
