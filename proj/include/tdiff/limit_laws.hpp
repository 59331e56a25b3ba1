#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tdiff/model.hpp"
#include "tdiff/rng.hpp"

namespace tdiff {

enum class Functional { ArgmaxU, BayesU, IntW2_01, SupAbsW_01, IntW2Exp };

std::string_view to_string(Functional tag) noexcept;
std::optional<Functional> functional_from_string(std::string_view name) noexcept;

/// E uhat^2 for the argmax of exp(W(u) - |u|/2).
inline constexpr double kArgmaxSecondMoment = 26.0;
/// E utilde^2 = 16 zeta(3).
double bayes_second_moment();

/// Two-sided grid for the field log Z(u) = W(u) - |u|/2 on [-U, U].
struct FieldGrid {
  double half_width = 60.0;
  double step = 0.01;
};

/// Grids for the one-sided Brownian functionals.
struct FunctionalGrid {
  double step = 1e-3;
  /// Upper limit for int_0^inf W^2 e^{-s} ds: e^{-s} below 1e-8 beyond it.
  double exp_horizon = 18.420680743952367;  // ln(1e8)
};

struct FieldDraw {
  double argmax = 0.0;
  double posterior_mean = 0.0;
  std::size_t boundary_hits = 0;
};

/// One (uhat, utilde) pair. Draws whose argmax sits on +-U are discarded and
/// redrawn from the same stream; the number of discards is reported.
FieldDraw sample_uhat_utilde(const FieldGrid& grid, Sampler& sampler);
FieldDraw sample_uhat_utilde(const FieldGrid& grid, RngStream rng);

/// int_0^1 W^2 (trapezoid), sup_[0,1] |W| (grid max plus the 0.5826 sqrt(h)
/// discrete-monitoring correction), int_0^H W^2 e^{-s} (trapezoid).
double sample_functional(Functional tag, const FunctionalGrid& grid, Sampler& sampler);

struct LimitLawSamples {
  Functional tag = Functional::ArgmaxU;
  double horizon = 0.0;
  double step = 0.0;
  std::vector<double> samples;
  std::uint64_t seed = 0;
  std::size_t boundary_hits = 0;

  double mean() const;
  double variance() const;
  double second_moment() const;
};

struct FieldSamples {
  LimitLawSamples argmax;
  LimitLawSamples posterior_mean;
};

/// Draw i uses stream (seed, i); results do not depend on `workers`.
FieldSamples sample_field_batch(std::size_t draws, const FieldGrid& grid, std::uint64_t seed,
                                unsigned workers = 1);
LimitLawSamples sample_functional_batch(Functional tag, std::size_t draws, const FunctionalGrid& grid,
                                        std::uint64_t seed, unsigned workers = 1);

struct QuantileEntry {
  double alpha = 0.0;
  double threshold = 0.0;
  double se = 0.0;
};

/// Upper-tail thresholds P{functional > threshold} = alpha.
struct QuantileTable {
  Functional tag = Functional::IntW2_01;
  std::vector<QuantileEntry> entries;  // sorted by alpha ascending
  std::size_t replicates = 0;
  double grid = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  double mean = 0.0;
  double variance = 0.0;

  /// Threshold at alpha, linear in alpha between tabulated entries.
  double threshold(double alpha) const;
  /// Model CDF implied by the table at x, i.e. 1 - alpha(x), interpolated.
  double cdf(double x) const;
};

/// Empirical (1 - alpha) quantiles (inverse ECDF) with bootstrap standard
/// errors from `bootstrap` multinomial resamples.
QuantileTable quantile_table(Functional tag, std::vector<double> samples, const std::vector<double>& alphas,
                             std::uint64_t seed, std::size_t bootstrap = 200);

QuantileTable build_quantile_table(Functional tag, const std::vector<double>& alphas, std::size_t replicates,
                                   std::uint64_t seed, unsigned workers = 1, FunctionalGrid grid = {});

/// alpha = 0.001, 0.002, ..., 0.999.
std::vector<double> dense_alpha_grid();

/// sup over the table's alphas of |F_emp(threshold) - (1 - alpha)|.
double ks_distance_to_table(const std::vector<double>& samples, const QuantileTable& table);

/// Versioned CSV `<dir>/<tag>.csv` with a checksummed comment header.
std::string table_file(const std::string& dir, Functional tag);
void write_quantile_table(const QuantileTable& table, const std::string& dir);
QuantileTable read_quantile_table(const std::string& dir, Functional tag);

struct ErrorScale {
  double mle = 0.0;
  double bayes = 0.0;
};

/// (E uhat^2 / Gamma^4, E utilde^2 / Gamma^4) for threshold j.
ErrorScale predicted_error_scale(const ModelSpec& model, std::size_t j,
                                 GammaVariant variant = GammaVariant::General);

}  // namespace tdiff
