#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "tdiff/model.hpp"
#include "tdiff/quadrature.hpp"

namespace tdiff {

/// Stationary density of an ergodic threshold diffusion,
///
///   f(x) = p(x) / G,   p(x) = sigma(a)^2 / sigma(x)^2 * exp( int_a^x 2 S(y) / sigma(y)^2 dy ),
///
/// anchored at a = first threshold so that p(a) = 1 and G = 1 / f(a). The
/// two-regime and OU models use closed forms for log p; general models
/// integrate the scale function numerically. G and the CDF are tabulated by
/// adaptive quadrature over a support [lower, upper] outside which the
/// log-density is at least `kTailDrop` below its peak.
class InvariantDensity {
 public:
  static constexpr double kTailDrop = 50.0;
  static constexpr std::size_t kSegments = 600;

  explicit InvariantDensity(const ModelSpec& model);

  double log_unnormalized(double x) const;
  double pdf(double x) const;
  /// Right limit f(x+0); differs from pdf only where sigma(x) jumps.
  double pdf_right(double x) const;
  double cdf(double x) const;
  /// 1 - F(x), accumulated from the upper tail.
  double sf(double x) const;
  double quantile(double u) const;

  double normalizer() const noexcept { return std::exp(log_normalizer_); }
  double log_normalizer() const noexcept { return log_normalizer_; }
  double lower() const noexcept { return nodes_.front(); }
  double upper() const noexcept { return nodes_.back(); }
  const std::vector<double>& nodes() const noexcept { return nodes_; }

  /// int_a^b g(x) dx over the part of [a, b] inside the support, split at the
  /// tabulation nodes (g need not involve f).
  double integrate(const std::function<double(double)>& g, double a, double b,
                   quad::Tolerance tol = {1e-13, 1e-11, 18}) const;
  /// int_a^b g(x) f(x) dx over the part of [a, b] inside the support.
  double expect(const std::function<double(double)>& g,
                double a = -std::numeric_limits<double>::infinity(),
                double b = std::numeric_limits<double>::infinity()) const;

 private:
  double log_p(double x, bool right_limit) const;
  double scale_integral(double x) const;
  std::size_t segment_of(double x) const;
  double search_edge(double anchor, double direction) const;

  ModelSpec model_;
  bool numeric_ = false;
  double anchor_ = 0.0;
  double log_sigma2_anchor_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> node_scale_;  // int_anchor^node 2S/sigma^2, general models only
  std::vector<double> cum_lower_;   // normalized mass below node k
  std::vector<double> cum_upper_;   // normalized mass above node k
  double log_normalizer_ = 0.0;
};

}  // namespace tdiff
