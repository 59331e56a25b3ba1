#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdiff/model.hpp"

namespace tdiff {

/// Unknown additive drift perturbation h(x) of the TOU trend.
struct Contamination {
  ScalarFn h;
  std::string tag = "none";
  ParamInterval box{};

  static Contamination none();
  /// h(x) = slope * x on lo <= x < hi, zero elsewhere.
  static Contamination linear(double slope, double lo, double hi);
  /// h(x) = factor * (rho2 - rho1) * x on lo <= x < hi, zero elsewhere.
  static Contamination scaled_threshold(double factor, double rho1, double rho2, double lo, double hi);
  /// Linear interpolation of (x, h) pairs, constant beyond the ends.
  static Contamination tabulated(std::vector<double> xs, std::vector<double> hs);
  static Contamination from_csv(const std::string& file);
};

/// Observed process dX = (S_TOU(X) + h(X)) dt + sigma dW as a general model.
ModelSpec contaminated_model(const Tou& base, const Contamination& h);

double contaminated_density(const Tou& base, const Contamination& h, double x);

/// K(theta) = E*[((rho1 - rho2) xi 1{theta0 < xi < theta} + h(xi))^2] for
/// theta >= theta0, with the mirrored indicator below theta0; the expectation
/// is under the contaminated stationary law and theta0 = base.theta.
double kl_value(const Tou& base, const Contamination& h, double theta);
std::vector<double> kl_profile(const Tou& base, const Contamination& h, const std::vector<double>& thetas);

/// dK/dtheta = +-[(rho_a - rho_b)^2 theta^2 + 2 (rho_a - rho_b) theta h(theta)] f_h(theta).
double kl_derivative(const Tou& base, const Contamination& h, double theta);

struct KlMinimum {
  double argmin = 0.0;
  double value = 0.0;
};
/// Grid search over the box refined by golden-section on the bracketing cell.
KlMinimum kl_argmin(const Tou& base, const Contamination& h, ParamInterval box, std::size_t grid = 400);

struct Condition7Result {
  bool holds = false;
  double margin = 0.0;
  double worst_y = 0.0;
};

/// min over a closed grid on [lo, hi] of (y/2)(rho2 - rho1) - |h(y)|; holds
/// when the minimum is strictly positive. Throws ConventionViolation unless
/// rho2 > rho1.
Condition7Result condition7_check(const ScalarFn& h, double rho1, double rho2, ParamInterval box,
                                  std::size_t grid = 10000);

/// Reflection x -> -x, which swaps the regimes so that rho2 > rho1 can be
/// enforced: TOU(rho1, rho2, sigma, theta) becomes TOU(rho2, rho1, sigma, -theta)
/// and h(x) becomes -h(-x).
Tou relabel(const Tou& base);
Contamination relabel(const Contamination& h);

struct MisspecRow {
  double duration = 0.0;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  double median_estimate = 0.0;
  double mean_estimate = 0.0;
  double median_bias = 0.0;
  double iqr = 0.0;
  std::vector<double> estimates;  // per replicate, NaN where the fit failed
};

struct MisspecReport {
  double theta0 = 0.0;
  double kl_argmin = 0.0;
  Condition7Result condition7;
  std::vector<MisspecRow> rows;
};

struct MisspecSettings {
  std::vector<double> durations{500.0, 1000.0, 2000.0};
  double dt = 1e-3;
  std::size_t replicates = 200;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

/// Simulates the contaminated process from its stationary law and fits the
/// clean TOU threshold MLE on `box` for each duration.
MisspecReport misspec_experiment(const Tou& base, const Contamination& h, ParamInterval box,
                                 const MisspecSettings& settings);

}  // namespace tdiff
