#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tdiff/estimators.hpp"
#include "tdiff/gof.hpp"
#include "tdiff/limit_laws.hpp"
#include "tdiff/model.hpp"
#include "tdiff/serialize.hpp"
#include "tdiff/simulate.hpp"

namespace tdiff {

enum class ExperimentKind {
  Threshold,  ///< threshold estimators for a model with known coefficients
  Tou3,       ///< joint (rho1, rho2, theta) estimation for TOU
  Gof,        ///< goodness-of-fit size and power
  Misspec,    ///< clean TOU fit to a contaminated process
  LimitLaw,   ///< moments of the limit functionals
  Tables,     ///< quantile tables for the Brownian functionals
};

std::string_view to_string(ExperimentKind kind) noexcept;
std::optional<ExperimentKind> experiment_kind_from_string(std::string_view name) noexcept;

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Threshold;
  std::optional<ModelSpec> model;
  /// Process that generates the data when it differs from `model` (power runs).
  std::optional<ModelSpec> truth;
  ParamBox box;
  std::vector<double> durations;
  double dt = 1e-3;
  std::size_t replicates = 1;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = "out";
  std::vector<Method> estimators{Method::Mle};
  InitRule init = InitRule::stationary();
  GammaVariant gamma_variant = GammaVariant::General;
  std::vector<Statistic> statistics{Statistic::W2};
  std::vector<double> alphas{0.05};
  bool composite = false;
  std::string tables_dir = "data/tables";
  Json contamination;
  std::size_t draws = 0;
  FieldGrid field_grid;
  FunctionalGrid functional_grid;
  std::vector<Functional> functionals;
  std::size_t bootstrap = 200;
  /// Failure rate above which the run is flagged as a breach.
  double max_failure_rate = 0.10;
  Json raw;
  std::string hash;
};

/// Parses and validates a config; ConfigError messages name the field.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::string& file);

/// FNV-1a of the canonical (sorted-key) JSON without run-only fields
/// (workers, out_dir).
std::string config_hash(const Json& j);

/// One row of replicates.csv. `values` aligns with ExperimentReport::columns.
struct ReplicateRecord {
  double duration = 0.0;
  std::size_t replicate = 0;
  std::uint64_t stream = 0;
  std::string label;
  std::string status = "ok";
  std::vector<double> values;
};

struct ExperimentReport {
  std::string kind;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<ReplicateRecord> records;
  Json summary = Json::object();
  std::size_t attempted = 0;
  std::size_t failures = 0;
  bool failure_breach = false;
  double seconds = 0.0;

  double failure_rate() const noexcept {
    return attempted == 0 ? 0.0 : static_cast<double>(failures) / static_cast<double>(attempted);
  }
};

/// Runs the experiment. Replicate i at duration index t uses stream
/// t * replicates + i, so results do not depend on the worker count.
/// Per-replicate library errors are recorded in the status column.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Writes the quantile tables requested by a Tables config into tables_dir.
std::vector<QuantileTable> build_tables(const ExperimentConfig& config);

/// report.json and replicates.csv under `dir`; both carry the config hash
/// and master seed.
void write_report(const ExperimentReport& report, const std::string& dir);
std::string replicates_csv(const ExperimentReport& report);
Json report_to_json(const ExperimentReport& report);

std::string_view library_version() noexcept;

}  // namespace tdiff
