#include "tdiff/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <variant>

#include <boost/math/tools/roots.hpp>

#include "tdiff/error.hpp"

namespace tdiff {

namespace {

constexpr double kInitialStep = 0.01;
constexpr double kStepGrowth = 1.5;
constexpr double kFarthest = 1e7;

double right_of(double x) { return x + 1e-10 * (1.0 + std::abs(x)); }

}  // namespace

InvariantDensity::InvariantDensity(const ModelSpec& model) : model_(model.variant()) {
  model_.check_ergodic();
  numeric_ = model_.kind() == ModelKind::GeneralThreshold;
  const auto th = model_.thresholds();
  anchor_ = th.empty() ? 0.0 : th.front();
  const double s_anchor = model_.sigma(anchor_);
  if (!(s_anchor > 0.0)) fail(ErrorKind::DegenerateSigma, "sigma vanishes at the anchor point");
  log_sigma2_anchor_ = 2.0 * std::log(s_anchor);

  const double lo = search_edge(anchor_, -1.0);
  const double hi = search_edge(anchor_, +1.0);

  // Structural nodes (thresholds, kinks, anchor) are kept exactly; uniform
  // nodes that land within `gap` of one are dropped so no segment is
  // degenerate.
  std::vector<double> fixed(th.begin(), th.end());
  if (const auto* g = std::get_if<GeneralThreshold>(&model_.variant())) {
    for (double k : g->kinks) {
      if (k > lo && k < hi) fixed.push_back(k);
    }
  }
  fixed.push_back(anchor_);
  std::sort(fixed.begin(), fixed.end());
  const double gap = 1e-6 * (hi - lo) / static_cast<double>(kSegments);
  nodes_.reserve(kSegments + 1 + fixed.size());
  for (std::size_t k = 0; k <= kSegments; ++k) {
    const double x = k == kSegments ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(kSegments);
    const auto it = std::lower_bound(fixed.begin(), fixed.end(), x);
    const bool close = (it != fixed.end() && *it - x < gap) || (it != fixed.begin() && x - *(it - 1) < gap);
    if (!close || k == 0 || k == kSegments) nodes_.push_back(x);
  }
  for (double f : fixed) nodes_.push_back(f);
  std::sort(nodes_.begin(), nodes_.end());
  nodes_.erase(std::unique(nodes_.begin(), nodes_.end(), [gap](double a, double b) { return b - a < gap; }),
               nodes_.end());

  if (numeric_) {
    // Scale integral at every node, accumulated outwards from the anchor.
    node_scale_.assign(nodes_.size(), 0.0);
    const auto a_idx = static_cast<std::size_t>(
        std::lower_bound(nodes_.begin(), nodes_.end(), anchor_) - nodes_.begin());
    auto ratio = [this](double y) {
      const double s = model_.sigma(y);
      return 2.0 * model_.trend(y) / (s * s);
    };
    for (std::size_t k = a_idx + 1; k < nodes_.size(); ++k) {
      node_scale_[k] = node_scale_[k - 1] + quad::integrate(ratio, nodes_[k - 1], nodes_[k], {1e-13, 1e-12, 15});
    }
    for (std::size_t k = a_idx; k-- > 0;) {
      node_scale_[k] = node_scale_[k + 1] - quad::integrate(ratio, nodes_[k], nodes_[k + 1], {1e-13, 1e-12, 15});
    }
  }

  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    peak = std::max(peak, log_p(nodes_[k], false));
    if (k + 1 < nodes_.size()) peak = std::max(peak, log_p(0.5 * (nodes_[k] + nodes_[k + 1]), false));
  }
  if (!std::isfinite(peak)) fail(ErrorKind::NumericalBlowup, "invariant density has no finite peak");

  const std::size_t segs = nodes_.size() - 1;
  std::vector<double> mass(segs);
  for (std::size_t k = 0; k < segs; ++k) {
    auto shifted = [this, peak](double x) { return std::exp(log_p(x, false) - peak); };
    mass[k] = quad::integrate(shifted, nodes_[k], nodes_[k + 1], {1e-300, 1e-12, 15});
  }
  double total = 0.0;
  for (double m : mass) total += m;
  if (!(total > 0.0) || !std::isfinite(total)) {
    fail(ErrorKind::QuadratureFailure, "invariant density normalizer is not finite");
  }
  log_normalizer_ = peak + std::log(total);

  cum_lower_.assign(nodes_.size(), 0.0);
  cum_upper_.assign(nodes_.size(), 0.0);
  for (std::size_t k = 0; k < segs; ++k) cum_lower_[k + 1] = cum_lower_[k] + mass[k] / total;
  for (std::size_t k = segs; k-- > 0;) cum_upper_[k] = cum_upper_[k + 1] + mass[k] / total;
}

double InvariantDensity::search_edge(double anchor, double direction) const {
  // Walk outwards with growing steps until log p has dropped kTailDrop below
  // the largest value seen on this side.
  double x = anchor;
  double scale = 0.0;  // scale integral at x (general models)
  double best = 0.0;   // log p(anchor) = 0
  double step = kInitialStep * (1.0 + std::abs(anchor));
  auto breaks = model_.thresholds();
  if (const auto* g = std::get_if<GeneralThreshold>(&model_.variant())) {
    breaks.insert(breaks.end(), g->kinks.begin(), g->kinks.end());
    std::sort(breaks.begin(), breaks.end());
  }
  auto ratio = [this](double y) {
    const double s = model_.sigma(y);
    return 2.0 * model_.trend(y) / (s * s);
  };
  while (std::abs(x - anchor) < kFarthest) {
    const double next = x + direction * step;
    double lp = 0.0;
    if (numeric_) {
      // Split at thresholds and kinks so each piece is smooth.
      double a = std::min(x, next);
      const double b = std::max(x, next);
      double piece = 0.0;
      for (double t : breaks) {
        if (t > a && t < b) {
          piece += quad::integrate(ratio, a, t, {1e-13, 1e-12, 15});
          a = t;
        }
      }
      piece += quad::integrate(ratio, a, b, {1e-13, 1e-12, 15});
      scale += direction * piece;
      const double s = model_.sigma(next);
      if (!(s > 0.0)) fail(ErrorKind::DegenerateSigma, "sigma vanishes inside the support");
      lp = log_sigma2_anchor_ - 2.0 * std::log(s) + scale;
    } else {
      lp = log_p(next, false);
    }
    x = next;
    best = std::max(best, lp);
    if (lp < best - kTailDrop) return x;
    step *= kStepGrowth;
  }
  std::ostringstream msg;
  msg << model_.describe() << ": invariant density does not decay within " << kFarthest
      << " of the anchor";
  fail(ErrorKind::NonErgodicModel, msg.str());
}

std::size_t InvariantDensity::segment_of(double x) const {
  if (x <= nodes_.front()) return 0;
  if (x >= nodes_.back()) return nodes_.size() - 2;
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  return static_cast<std::size_t>(it - nodes_.begin()) - 1;
}

double InvariantDensity::scale_integral(double x) const {
  const std::size_t k = segment_of(x);
  // Start from the nearer end of the segment.
  const bool from_left = x <= nodes_.front() ||
                         (x < nodes_.back() && x - nodes_[k] <= nodes_[k + 1] - x);
  const std::size_t base = from_left ? k : k + 1;
  auto ratio = [this](double y) {
    const double s = model_.sigma(y);
    return 2.0 * model_.trend(y) / (s * s);
  };
  const double a = nodes_[base];
  if (x == a) return node_scale_[base];
  if (std::abs(x - a) <= (nodes_[k + 1] - nodes_[k])) {
    return node_scale_[base] + quad::gauss15(ratio, a, x);
  }
  return node_scale_[base] + quad::integrate(ratio, a, x, {1e-13, 1e-12, 15});
}

double InvariantDensity::log_p(double x, bool right_limit) const {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Tou>) {
          const double rho = x < m.theta ? m.rho1 : m.rho2;
          return -rho * (x * x - m.theta * m.theta) / (m.sigma * m.sigma);
        } else if constexpr (std::is_same_v<M, SimpleThreshold>) {
          const double rho = x < m.theta ? m.rho1 : m.rho2;
          return -2.0 * rho * std::abs(x - m.theta) / (m.sigma * m.sigma);
        } else if constexpr (std::is_same_v<M, SimpleSwitching>) {
          return -2.0 * m.rho * std::abs(x - m.theta) / (m.sigma * m.sigma);
        } else if constexpr (std::is_same_v<M, MultiThresholdOu>) {
          const double s2 = m.sigma * m.sigma;
          const double t0 = m.thresholds.front();
          double c = m.rates.front() * t0 * t0 / s2;
          const std::size_t j = model_.regime(x);
          for (std::size_t i = 0; i < j; ++i) {
            const double t = m.thresholds[i];
            c += (m.rates[i + 1] - m.rates[i]) * t * t / s2;
          }
          return -m.rates[j] * x * x / s2 + c;
        } else {
          const double s = model_.sigma(right_limit ? right_of(x) : x);
          if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
          return log_sigma2_anchor_ - 2.0 * std::log(s) + scale_integral(x);
        }
      },
      model_.variant());
}

double InvariantDensity::log_unnormalized(double x) const { return log_p(x, false); }

double InvariantDensity::pdf(double x) const { return std::exp(log_p(x, false) - log_normalizer_); }

double InvariantDensity::pdf_right(double x) const {
  return std::exp(log_p(x, true) - log_normalizer_);
}

double InvariantDensity::cdf(double x) const {
  if (std::isnan(x)) return x;
  if (x <= nodes_.front()) return 0.0;
  if (x >= nodes_.back()) return 1.0;
  const std::size_t k = segment_of(x);
  const double partial = quad::gauss15([this](double y) { return pdf(y); }, nodes_[k], x);
  return std::clamp(cum_lower_[k] + partial, 0.0, 1.0);
}

double InvariantDensity::sf(double x) const {
  if (std::isnan(x)) return x;
  if (x <= nodes_.front()) return 1.0;
  if (x >= nodes_.back()) return 0.0;
  const std::size_t k = segment_of(x);
  const double partial = quad::gauss15([this](double y) { return pdf(y); }, x, nodes_[k + 1]);
  return std::clamp(cum_upper_[k + 1] + partial, 0.0, 1.0);
}

double InvariantDensity::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) {
    if (u == 0.0) return nodes_.front();
    if (u == 1.0) return nodes_.back();
    fail(ErrorKind::InvalidArgument, "quantile level must lie in [0, 1]");
  }
  const bool upper = u > 0.5;
  std::size_t k = 0;
  if (!upper) {
    const auto it = std::upper_bound(cum_lower_.begin(), cum_lower_.end(), u);
    k = static_cast<std::size_t>(it - cum_lower_.begin()) - 1;
  } else {
    // cum_upper_ is decreasing; find the last node with mass above >= 1-u.
    const double v = 1.0 - u;
    const auto it = std::upper_bound(cum_upper_.begin(), cum_upper_.end(), v,
                                     [](double a, double b) { return a > b; });
    k = static_cast<std::size_t>(it - cum_upper_.begin()) - 1;
  }
  k = std::min(k, nodes_.size() - 2);
  auto gap = [&](double x) { return upper ? (1.0 - u) - sf(x) : cdf(x) - u; };
  std::uintmax_t iters = 200;
  const auto tol = boost::math::tools::eps_tolerance<double>(50);
  double a = nodes_[k];
  double b = nodes_[k + 1];
  double fa = gap(a);
  double fb = gap(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) return std::abs(fa) < std::abs(fb) ? a : b;
  const auto r = boost::math::tools::toms748_solve(gap, a, b, fa, fb, tol, iters);
  return 0.5 * (r.first + r.second);
}

double InvariantDensity::integrate(const std::function<double(double)>& g, double a, double b,
                                   quad::Tolerance tol) const {
  if (a == b) return 0.0;
  if (a > b) return -integrate(g, b, a, tol);
  a = std::max(a, nodes_.front());
  b = std::min(b, nodes_.back());
  if (!(a < b)) return 0.0;
  auto first = std::upper_bound(nodes_.begin(), nodes_.end(), a);
  double total = 0.0;
  double left = a;
  for (auto it = first; it != nodes_.end() && *it < b; ++it) {
    total += quad::integrate(g, left, *it, tol);
    left = *it;
  }
  total += quad::integrate(g, left, b, tol);
  return total;
}

double InvariantDensity::expect(const std::function<double(double)>& g, double a, double b) const {
  return integrate([&](double x) { return g(x) * pdf(x); }, a, b);
}

}  // namespace tdiff
