#include "tdiff/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "tdiff/error.hpp"

namespace tdiff {

namespace {

void require_sigma(double s) {
  if (!(s > 0.0)) fail(ErrorKind::DegenerateSigma, "sigma must be positive for likelihood evaluation");
}

// S/sigma^2 dX - S^2/(2 sigma^2) dt for one step.
inline double step_term(double trend, double inv_s2, double dx, double dt) {
  return trend * inv_s2 * dx - 0.5 * trend * trend * inv_s2 * dt;
}

bool below(double x, double theta, BandConvention convention) {
  return convention == BandConvention::LowerOpen ? x < theta : x <= theta;
}

}  // namespace

double loglik_tou(PathView path, double rho1, double rho2, double sigma, double theta) {
  require_sigma(sigma);
  const double inv_s2 = 1.0 / (sigma * sigma);
  const std::size_t n = path.steps();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = path[i];
    const double trend = x < theta ? -rho1 * x : -rho2 * x;
    total += step_term(trend, inv_s2, path[i + 1] - x, path.dt);
  }
  return total;
}

double loglik_general(PathView path, const ModelSpec& model) {
  model.validate_simulable();
  const std::size_t n = path.steps();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = path[i];
    const double s = model.sigma(x);
    require_sigma(s);
    total += step_term(model.trend(x), 1.0 / (s * s), path[i + 1] - x, path.dt);
  }
  return total;
}

std::vector<double> component_contributions(PathView path, const ModelSpec& model, std::size_t j) {
  if (j >= model.num_thresholds()) fail(ErrorKind::IndexOutOfRange, "likelihood component index out of range");
  const std::size_t n = path.steps();
  std::vector<double> out(n);
  const auto cs = model.constant_sigma();
  if (cs) require_sigma(*cs);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = path[i];
    const double s = cs ? *cs : model.sigma(x);
    if (!cs) require_sigma(s);
    const double inv_s2 = 1.0 / (s * s);
    const double lower = model.regime_trend(j, x);
    const double upper = model.regime_trend(j + 1, x);
    out[i] = (lower - upper) * inv_s2 * (path[i + 1] - x) -
             0.5 * (lower * lower - upper * upper) * inv_s2 * path.dt;
  }
  return out;
}

double factorized_loglik(PathView path, const ModelSpec& model, std::size_t j, double theta_j) {
  const auto c = component_contributions(path, model, j);
  const auto convention = model.convention();
  double total = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (below(path[i], theta_j, convention)) total += c[i];
  }
  return total;
}

double base_loglik(PathView path, const ModelSpec& model) {
  const std::size_t last = model.num_regimes() - 1;
  const std::size_t n = path.steps();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = path[i];
    const double s = model.sigma(x);
    require_sigma(s);
    total += step_term(model.regime_trend(last, x), 1.0 / (s * s), path[i + 1] - x, path.dt);
  }
  return total;
}

double LogLikCurve::edge(std::size_t k) const {
  if (k == 0) return box.lo;
  if (k > breakpoints.size()) return box.hi;
  return breakpoints[k - 1];
}

std::vector<double> LogLikCurve::candidates() const {
  std::vector<double> out(intervals());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = midpoint(k);
  return out;
}

bool LogLikCurve::flat() const {
  if (values.empty()) return true;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *lo == *hi;
}

std::size_t LogLikCurve::argmax() const {
  if (values.empty()) fail(ErrorKind::InvalidArgument, "empty likelihood curve");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

double LogLikCurve::max_value() const { return values.at(argmax()); }

double LogLikCurve::value_at(double theta) const {
  if (!(theta > box.lo && theta < box.hi)) fail(ErrorKind::InvalidArgument, "theta outside curve box");
  const auto it = convention == BandConvention::LowerOpen
                      ? std::lower_bound(breakpoints.begin(), breakpoints.end(), theta)
                      : std::upper_bound(breakpoints.begin(), breakpoints.end(), theta);
  return values[static_cast<std::size_t>(it - breakpoints.begin())];
}

LogLikCurve sweep_curve(std::span<const double> states, std::span<const double> contributions,
                        ParamInterval box, BandConvention convention) {
  if (states.size() != contributions.size()) {
    fail(ErrorKind::InvalidArgument, "states and contributions differ in length");
  }
  if (!(box.lo < box.hi)) fail(ErrorKind::InvalidArgument, "likelihood box must satisfy lo < hi");
  LogLikCurve curve;
  curve.box = box;
  curve.convention = convention;

  double base = 0.0;
  std::vector<std::pair<double, double>> inside;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double x = states[i];
    if (x <= box.lo) {
      base += contributions[i];
    } else if (x < box.hi) {
      inside.emplace_back(x, contributions[i]);
    }
  }
  std::sort(inside.begin(), inside.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  curve.values.reserve(inside.size() + 1);
  curve.breakpoints.reserve(inside.size());
  curve.values.push_back(base);
  double running = base;
  for (std::size_t i = 0; i < inside.size();) {
    const double x = inside[i].first;
    double step = 0.0;
    for (; i < inside.size() && inside[i].first == x; ++i) step += inside[i].second;
    running += step;
    curve.breakpoints.push_back(x);
    curve.values.push_back(running);
  }
  return curve;
}

LogLikCurve loglik_curve(PathView path, const ModelSpec& model, std::size_t j, ParamInterval box) {
  const auto c = component_contributions(path, model, j);
  return sweep_curve(path.values.first(c.size()), c, box, model.convention());
}

void write_curve_csv(const LogLikCurve& curve, const std::string& file) {
  std::ofstream out(file);
  if (!out) fail(ErrorKind::IoError, "cannot open " + file + " for writing");
  out << "theta,loglik\n" << std::setprecision(17);
  for (std::size_t k = 0; k < curve.intervals(); ++k) out << curve.midpoint(k) << ',' << curve.values[k] << '\n';
  if (!out) fail(ErrorKind::IoError, "failed writing " + file);
}

}  // namespace tdiff
