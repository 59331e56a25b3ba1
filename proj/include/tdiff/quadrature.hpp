#pragma once

#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tdiff/error.hpp"

namespace tdiff::quad {

struct Tolerance {
  double absolute = 1e-12;
  double relative = 1e-12;
  unsigned max_depth = 18;
};

namespace detail {

// One 31-point Gauss-Kronrod panel. Boost reports the error of the rule on
// [-1, 1], so the panel is mapped there explicitly and both the value and the
// error are scaled back by the half-width.
template <class F>
double kronrod_panel(F& f, double a, double b, double& error, double& l1) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  auto g = [&](double t) { return f(mid + half * t); };
  double e = 0.0, l = 0.0;
  const double r = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, -1.0, 1.0, 0, 0.0, &e, &l);
  error = std::abs(half) * e;
  l1 = std::abs(half) * l;
  return half * r;
}

template <class F>
double bisect(F& f, double a, double b, double value, double error, double budget, unsigned depth,
              double& total_error, double& total_l1, double l1) {
  if (error <= budget || depth == 0 || !std::isfinite(value)) {
    total_error += error;
    total_l1 += l1;
    return value;
  }
  const double mid = 0.5 * (a + b);
  double el = 0.0, ll = 0.0, er = 0.0, lr = 0.0;
  const double vl = kronrod_panel(f, a, mid, el, ll);
  const double vr = kronrod_panel(f, mid, b, er, lr);
  return bisect(f, a, mid, vl, el, 0.5 * budget, depth - 1, total_error, total_l1, ll) +
         bisect(f, mid, b, vr, er, 0.5 * budget, depth - 1, total_error, total_l1, lr);
}

}  // namespace detail

/// Adaptive 31-point Gauss-Kronrod on [a, b] by bisection. Throws
/// QuadratureFailure when the accumulated error estimate stays above the
/// requested tolerance.
template <class F>
double integrate(F&& f, double a, double b, Tolerance tol = {}) {
  if (a == b) return 0.0;
  double err0 = 0.0, l10 = 0.0;
  const double first = detail::kronrod_panel(f, a, b, err0, l10);
  const double allowed = std::max(tol.absolute, tol.relative * l10);
  double error = 0.0, l1 = 0.0;
  const double value = detail::bisect(f, a, b, first, err0, allowed, tol.max_depth, error, l1, l10);
  if (!std::isfinite(value) || error > 100.0 * std::max(tol.absolute, tol.relative * l1)) {
    std::ostringstream msg;
    msg << "integral over [" << a << ", " << b << "] = " << value << " with error estimate "
        << error << " (allowed " << allowed << ", L1 " << l1 << ")";
    fail(ErrorKind::QuadratureFailure, msg.str());
  }
  return value;
}

/// Fixed 15-point Gauss-Legendre rule; exact enough on short smooth pieces.
template <class F>
double gauss15(F&& f, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss<double, 15>::integrate(f, a, b);
}

}  // namespace tdiff::quad
