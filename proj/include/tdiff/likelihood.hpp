#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tdiff/model.hpp"
#include "tdiff/path.hpp"

namespace tdiff {

// All stochastic integrals use the left-point (Ito) rule,
//   int g(X) dX ~ sum g(X_i)(X_{i+1} - X_i),   int g(X) dt ~ sum g(X_i) dt,
// which makes the discrete log-likelihood the exact Euler transition
// likelihood up to terms free of the drift parameters. The ln f(X_0) term
// is omitted.

/// TOU log-likelihood with regime {x < theta} for rho1.
double loglik_tou(PathView path, double rho1, double rho2, double sigma, double theta);

/// sum_i S(X_i)/sigma(X_i)^2 dX_i - S(X_i)^2 / (2 sigma(X_i)^2) dt, with the
/// regime of X_i taken from the model's own thresholds and band convention.
double loglik_general(PathView path, const ModelSpec& model);

/// Per-sample increments of component j (0-based):
///   c_i = (S_j - S_{j+1})/sigma^2 dX_i - (S_j^2 - S_{j+1}^2)/(2 sigma^2) dt at X_i.
std::vector<double> component_contributions(PathView path, const ModelSpec& model, std::size_t j);

/// ln L_j(theta_j) = sum_i 1{X_i below theta_j} c_i, "below" meaning x < theta
/// for two-regime models and x <= theta for banded ones.
double factorized_loglik(PathView path, const ModelSpec& model, std::size_t j, double theta_j);

/// The threshold-free last factor sum S_{k+1}/sigma^2 dX - S_{k+1}^2/(2 sigma^2) dt.
double base_loglik(PathView path, const ModelSpec& model);

/// Piecewise-constant log-likelihood of one threshold over an open box.
/// Interval k is (edge(k), edge(k+1)) where the edges are lo, the sorted
/// distinct sample values strictly inside the box, and hi.
struct LogLikCurve {
  ParamInterval box;
  std::vector<double> breakpoints;
  std::vector<double> values;  // one per interval, breakpoints.size() + 1 entries
  BandConvention convention = BandConvention::LowerOpen;

  std::size_t intervals() const noexcept { return values.size(); }
  double edge(std::size_t k) const;
  double midpoint(std::size_t k) const { return 0.5 * (edge(k) + edge(k + 1)); }
  std::vector<double> candidates() const;
  /// No sample inside the box.
  bool empty() const noexcept { return breakpoints.empty(); }
  /// Constant over the whole box (includes the empty case).
  bool flat() const;
  /// Leftmost interval attaining the maximum.
  std::size_t argmax() const;
  double max_value() const;
  /// Value at an arbitrary theta, resolving ties at breakpoints by the
  /// model's band convention.
  double value_at(double theta) const;
};

/// O(n log n) sweep: base term from samples at or below lo, then one
/// cumulative update per distinct in-box sample value.
LogLikCurve sweep_curve(std::span<const double> states, std::span<const double> contributions,
                        ParamInterval box, BandConvention convention);

LogLikCurve loglik_curve(PathView path, const ModelSpec& model, std::size_t j, ParamInterval box);

/// CSV `theta,loglik` at interval midpoints.
void write_curve_csv(const LogLikCurve& curve, const std::string& file);

}  // namespace tdiff
