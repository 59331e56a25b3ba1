#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tdiff/likelihood.hpp"
#include "tdiff/model.hpp"
#include "tdiff/path.hpp"

namespace tdiff {

enum class Method { Mle, Bayes, Profile, TwoStage, MoM, Windowed };

std::string_view to_string(Method method) noexcept;

/// One estimated coordinate. Thresholds converge at rate T, rates at rate
/// sqrt(T) and the moment estimator at T^(1/4); `rate_exponent` records which.
struct ComponentEstimate {
  std::string name;
  double value = 0.0;
  double rate_exponent = 1.0;
  ParamInterval argmax_interval{};
  double curve_max = 0.0;
  double log_evidence = 0.0;
  std::size_t breakpoints = 0;
  bool flat = false;
  std::optional<double> truth;
  std::optional<double> normalized_error;
};

struct ThresholdEstimate {
  Method method = Method::Mle;
  std::vector<ComponentEstimate> components;
  double duration = 0.0;
  bool window_miss = false;
  std::map<std::string, double> diagnostics;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string model;

  std::vector<double> point() const;
  bool flat() const;
  /// Fills truth and T^rate_exponent (estimate - truth) per component.
  void attach_truth(std::span<const double> truth);
};

/// Prior density on one threshold box; an empty function means uniform.
struct Prior {
  ScalarFn density;

  static Prior uniform() { return {}; }
  bool is_uniform() const noexcept { return !density; }
};

/// Midpoint of the leftmost maximizing interval; box midpoint and the flat
/// flag when the curve is constant.
ComponentEstimate argmax_estimate(const LogLikCurve& curve, std::string name = "theta");

/// Posterior mean over the piecewise-constant likelihood, exact per interval
/// (closed form for the uniform prior, 15-point Gauss otherwise), max-shifted.
ComponentEstimate posterior_mean_estimate(const LogLikCurve& curve, const Prior& prior,
                                          std::string name = "theta");

/// Separate one-dimensional scans per threshold with all coefficients known.
ThresholdEstimate mle_threshold(PathView path, const ModelSpec& model, const ParamBox& box);

/// Posterior mean per threshold under quadratic loss (product-form prior).
ThresholdEstimate bayes_threshold(PathView path, const ModelSpec& model, const ParamBox& box,
                                  std::span<const Prior> priors = {});

/// -sum X dX / sum X^2 dt over the samples with lo <= X_i < hi.
double regime_rate(PathView path, double lo, double hi);

/// Joint (rho1, rho2, theta) for TOU by profiling out the rates in closed
/// form at each threshold interval. boxes = {rho1, rho2, theta}.
ThresholdEstimate joint_estimate_tou3(PathView path, double sigma, const ParamBox& boxes);

struct TwoStageOptions {
  /// Refuse paths with sqrt(T) below this many time units.
  double min_sqrt_duration = 10.0;
};

/// Threshold on [0, sqrt T] with box-midpoint rates, then closed-form rates
/// and a final threshold scan on [sqrt T, T].
ThresholdEstimate two_stage_estimate(PathView path, double sigma, const ParamBox& boxes,
                                     TwoStageOptions options = {});

/// Time average of the first floor(sqrt(T)/dt) samples.
ThresholdEstimate mom_switching(PathView path);

/// Threshold scan for the switching model on [sqrt T, T] restricted to the
/// window theta* +- T^(-1/8) around the moment estimate; `window` overrides it.
ThresholdEstimate windowed_mle_switching(PathView path, double rho, double sigma,
                                         std::optional<ParamInterval> window = std::nullopt);

}  // namespace tdiff
