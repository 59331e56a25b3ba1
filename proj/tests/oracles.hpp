#pragma once

// Independent reference implementations used only by the tests. Everything
// here is written directly from the defining formulas with naive loops and
// fixed grids so that it shares no code path with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Fn = std::function<double(double)>;

inline constexpr double kPi = 3.14159265358979323846;

/// Composite Simpson on [a, b] with n (even) panels.
inline double simpson(const Fn& g, double a, double b, std::size_t n) {
  if (n % 2) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double s = g(a) + g(b);
  for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * g(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

/// Simpson over [a, b] split at `cuts` so that each panel has a smooth integrand.
inline double simpson_split(const Fn& g, double a, double b, std::vector<double> cuts, std::size_t n_per_unit) {
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = std::max(a, cuts[i]), hi = std::min(b, cuts[i + 1]);
    if (!(hi > lo)) continue;
    const auto n = std::max<std::size_t>(8, static_cast<std::size_t>((hi - lo) * static_cast<double>(n_per_unit)));
    total += simpson(g, lo, hi, n);
  }
  return total;
}

/// TOU stationary density from its closed form: proportional to
/// exp(-rho_i (x^2 - theta^2) / sigma^2) with rho_1 below theta and rho_2 above.
struct TouDensity {
  double rho1, rho2, sigma, theta;

  double unnormalized(double x) const {
    const double r = x < theta ? rho1 : rho2;
    return std::exp(-r * (x * x - theta * theta) / (sigma * sigma));
  }
  /// Normalizer by Gaussian tail integrals.
  double normalizer() const {
    const double s2 = sigma * sigma;
    auto half = [&](double r, bool below) {
      // int exp(-r (x^2 - theta^2)/s2) over x < theta (below) or x > theta
      const double a = r / s2;
      const double tail = 0.5 * std::sqrt(kPi / a) * std::erfc((below ? -theta : theta) * std::sqrt(a));
      return std::exp(a * theta * theta) * tail;
    };
    return half(rho1, true) + half(rho2, false);
  }
  double pdf(double x) const { return unnormalized(x) / normalizer(); }
  double cdf(double x) const {
    const double s2 = sigma * sigma;
    const double G = normalizer();
    auto piece = [&](double r, double lo, double hi) {
      const double a = r / s2;
      const double c = std::exp(a * theta * theta) * 0.5 * std::sqrt(kPi / a);
      return c * (std::erf(hi * std::sqrt(a)) - std::erf(lo * std::sqrt(a)));
    };
    const double inf = std::numeric_limits<double>::infinity();
    if (x <= theta) return piece(rho1, -inf, x) / G;
    return (piece(rho1, -inf, theta) + piece(rho2, theta, x)) / G;
  }
};

/// Stationary density of dX = S(X) dt + s(X) dW on [lo, hi] by direct
/// trapezoid integration of the scale exponent on a uniform grid.
struct GridDensity {
  std::vector<double> x, f;
  double h = 0.0;

  GridDensity(const Fn& S, const Fn& s, double lo, double hi, std::size_t n) {
    h = (hi - lo) / static_cast<double>(n);
    x.resize(n + 1);
    std::vector<double> logp(n + 1);
    double acc = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      x[i] = lo + h * static_cast<double>(i);
      if (i > 0) {
        const double xm = x[i] - 0.5 * h;
        acc += 2.0 * S(xm) / (s(xm) * s(xm)) * h;
      }
      logp[i] = acc - 2.0 * std::log(s(x[i]));
    }
    const double mx = *std::max_element(logp.begin(), logp.end());
    f.resize(n + 1);
    double mass = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      f[i] = std::exp(logp[i] - mx);
      mass += (i == 0 || i == n ? 0.5 : 1.0) * f[i] * h;
    }
    for (auto& v : f) v /= mass;
  }

  double pdf(double at) const {
    if (at <= x.front() || at >= x.back()) return 0.0;
    const auto i = static_cast<std::size_t>((at - x.front()) / h);
    const double w = (at - x[i]) / h;
    return (1.0 - w) * f[i] + w * f[i + 1];
  }
};

/// Direct sum  sum S/s^2 dX - S^2/(2 s^2) dt  with the regime of each sample
/// taken from `drift`, which must already encode the thresholds.
inline double loglik_direct(const std::vector<double>& x, double dt, const Fn& drift, double sigma) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double S = drift(x[i]);
    s += S / (sigma * sigma) * (x[i + 1] - x[i]) - S * S / (2.0 * sigma * sigma) * dt;
  }
  return s;
}

/// ln L_j(theta) with "below" = (x < theta) when lower_open, else (x <= theta).
inline double factorized_direct(const std::vector<double>& x, double dt, const Fn& Sj, const Fn& Sj1, double sigma,
                                double theta, bool lower_open) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const bool below = lower_open ? x[i] < theta : x[i] <= theta;
    if (!below) continue;
    const double a = Sj(x[i]), b = Sj1(x[i]);
    s += (a - b) / (sigma * sigma) * (x[i + 1] - x[i]) - (a * a - b * b) / (2.0 * sigma * sigma) * dt;
  }
  return s;
}

/// Euler path with a std::normal_distribution, independent of the library RNG.
inline std::vector<double> euler(const Fn& drift, double sigma, double x0, std::size_t n, double dt, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  std::vector<double> x(n + 1);
  x[0] = x0;
  for (std::size_t i = 0; i < n; ++i) x[i + 1] = x[i] + drift(x[i]) * dt + sigma * std::sqrt(dt) * z(g);
  return x;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

inline double sample_variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double sample_mean(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = sample_mean(a), mb = sample_mean(b);
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += (a[i] - ma) * (b[i] - mb);
    aa += (a[i] - ma) * (a[i] - ma);
    bb += (b[i] - mb) * (b[i] - mb);
  }
  return ab / std::sqrt(aa * bb);
}

/// zeta(3) by direct summation with the Euler-Maclaurin tail.
inline double apery() {
  double s = 0.0;
  const int N = 100000;
  for (int n = 1; n <= N; ++n) s += 1.0 / (static_cast<double>(n) * n * n);
  const double n = N;
  return s + 1.0 / (2.0 * n * n) - 1.0 / (2.0 * n * n * n);
}

}  // namespace oracle
