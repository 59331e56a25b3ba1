#include "tdiff/misspec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "tdiff/density.hpp"
#include "tdiff/error.hpp"
#include "tdiff/estimators.hpp"
#include "tdiff/parallel.hpp"
#include "tdiff/simulate.hpp"

namespace tdiff {

namespace {

std::vector<double> kinks_of(const Contamination& h) {
  std::vector<double> out;
  if (std::isfinite(h.box.lo) && h.box.lo < h.box.hi) {
    out.push_back(h.box.lo);
    out.push_back(h.box.hi);
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Contamination Contamination::none() {
  return {[](double) { return 0.0; }, "none", {}};
}

Contamination Contamination::linear(double slope, double lo, double hi) {
  std::ostringstream tag;
  tag << "linear(slope=" << slope << ", [" << lo << ", " << hi << "))";
  return {[=](double x) { return x >= lo && x < hi ? slope * x : 0.0; }, tag.str(), {lo, hi}};
}

Contamination Contamination::scaled_threshold(double factor, double rho1, double rho2, double lo, double hi) {
  auto c = linear(factor * (rho2 - rho1), lo, hi);
  std::ostringstream tag;
  tag << "scaled-threshold(factor=" << factor << ", [" << lo << ", " << hi << "))";
  c.tag = tag.str();
  return c;
}

Contamination Contamination::tabulated(std::vector<double> xs, std::vector<double> hs) {
  if (xs.size() != hs.size() || xs.size() < 2) {
    fail(ErrorKind::InvalidArgument, "tabulated contamination needs at least two (x, h) pairs");
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i - 1] < xs[i])) fail(ErrorKind::InvalidArgument, "tabulated contamination x must increase");
  }
  const ParamInterval range{xs.front(), xs.back()};
  auto fn = [xs = std::move(xs), hs = std::move(hs)](double x) {
    if (x <= xs.front()) return hs.front();
    if (x >= xs.back()) return hs.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
    const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return hs[k - 1] + w * (hs[k] - hs[k - 1]);
  };
  return {fn, "tabulated", range};
}

Contamination Contamination::from_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::IoError, "cannot open " + file);
  std::vector<double> xs, hs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    try {
      const double x = std::stod(line.substr(0, comma));
      const double h = std::stod(line.substr(comma + 1));
      xs.push_back(x);
      hs.push_back(h);
    } catch (const std::exception&) {
      // header row
    }
  }
  auto c = tabulated(std::move(xs), std::move(hs));
  c.tag = "tabulated(" + file + ")";
  return c;
}

ModelSpec contaminated_model(const Tou& base, const Contamination& h) {
  if (!h.h) fail(ErrorKind::InvalidArgument, "contamination has no function");
  GeneralThreshold g;
  const double r1 = base.rho1, r2 = base.rho2;
  auto hf = h.h;
  g.trends = {[=](double x) { return -r1 * x + hf(x); }, [=](double x) { return -r2 * x + hf(x); }};
  const double s = base.sigma;
  g.sigma = [s](double) { return s; };
  g.constant_sigma = s;
  g.thresholds = {base.theta};
  g.kinks = kinks_of(h);
  g.label = "TOU+" + h.tag;
  return ModelSpec(std::move(g));
}

double contaminated_density(const Tou& base, const Contamination& h, double x) {
  return contaminated_model(base, h).density().pdf(x);
}

namespace {

// K(theta) against a prebuilt contaminated density.
double kl_with(const InvariantDensity& dens, const Tou& base, const Contamination& h, double theta) {
  const double t0 = base.theta;
  const double h2 = dens.expect([&](double x) {
    const double v = h.h(x);
    return v * v;
  });
  if (theta == t0) return h2;
  const double d = theta > t0 ? base.rho1 - base.rho2 : base.rho2 - base.rho1;
  const double lo = std::min(theta, t0), hi = std::max(theta, t0);
  const double extra = dens.expect(
      [&](double x) {
        const double v = h.h(x);
        const double u = d * x + v;
        return u * u - v * v;
      },
      lo, hi);
  return h2 + extra;
}

}  // namespace

double kl_value(const Tou& base, const Contamination& h, double theta) {
  const auto model = contaminated_model(base, h);
  return kl_with(model.density(), base, h, theta);
}

std::vector<double> kl_profile(const Tou& base, const Contamination& h, const std::vector<double>& thetas) {
  const auto model = contaminated_model(base, h);
  const auto& dens = model.density();
  std::vector<double> out;
  out.reserve(thetas.size());
  for (double t : thetas) out.push_back(kl_with(dens, base, h, t));
  return out;
}

double kl_derivative(const Tou& base, const Contamination& h, double theta) {
  const auto model = contaminated_model(base, h);
  const double f = model.density().pdf(theta);
  const double v = h.h(theta);
  if (theta >= base.theta) {
    const double d = base.rho1 - base.rho2;
    return (d * d * theta * theta + 2.0 * d * theta * v) * f;
  }
  const double d = base.rho2 - base.rho1;
  return -(d * d * theta * theta + 2.0 * d * theta * v) * f;
}

KlMinimum kl_argmin(const Tou& base, const Contamination& h, ParamInterval box, std::size_t grid) {
  if (!(box.lo < box.hi) || grid < 3) fail(ErrorKind::InvalidArgument, "kl_argmin needs a valid box and grid");
  const auto model = contaminated_model(base, h);
  const auto& dens = model.density();
  auto K = [&](double t) { return kl_with(dens, base, h, t); };
  std::vector<double> ts(grid + 1), ks(grid + 1);
  for (std::size_t k = 0; k <= grid; ++k) {
    ts[k] = box.lo + box.width() * static_cast<double>(k) / static_cast<double>(grid);
    ks[k] = K(ts[k]);
  }
  const auto best = static_cast<std::size_t>(std::min_element(ks.begin(), ks.end()) - ks.begin());
  const double a = ts[best == 0 ? 0 : best - 1];
  const double b = ts[std::min(best + 1, grid)];
  const auto r = boost::math::tools::brent_find_minima(K, a, b, 40);
  if (r.second <= ks[best]) return {r.first, r.second};
  return {ts[best], ks[best]};
}

Condition7Result condition7_check(const ScalarFn& h, double rho1, double rho2, ParamInterval box,
                                  std::size_t grid) {
  if (!(rho2 > rho1)) {
    fail(ErrorKind::ConventionViolation, "the contamination bound needs rho2 > rho1; relabel the regimes first");
  }
  if (!(box.lo < box.hi) || grid < 2) fail(ErrorKind::InvalidArgument, "condition check needs lo < hi");
  Condition7Result r;
  r.margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= grid; ++k) {
    const double y = k == grid ? box.hi : box.lo + box.width() * static_cast<double>(k) / static_cast<double>(grid);
    const double m = 0.5 * y * (rho2 - rho1) - std::abs(h(y));
    if (m < r.margin) {
      r.margin = m;
      r.worst_y = y;
    }
  }
  r.holds = r.margin > 0.0;
  return r;
}

Tou relabel(const Tou& base) { return {base.rho2, base.rho1, base.sigma, -base.theta}; }

Contamination relabel(const Contamination& h) {
  auto f = h.h;
  return {[f](double x) { return -f(-x); }, "reflected " + h.tag, {-h.box.hi, -h.box.lo}};
}

MisspecReport misspec_experiment(const Tou& base, const Contamination& h, ParamInterval box,
                                 const MisspecSettings& settings) {
  if (settings.replicates == 0 || settings.durations.empty()) {
    fail(ErrorKind::InvalidArgument, "misspec experiment needs replicates and durations");
  }
  const auto truth_model = contaminated_model(base, h);
  truth_model.density();  // build once before threads share it
  const ModelSpec fitted(base);

  MisspecReport report;
  report.theta0 = base.theta;
  report.kl_argmin = kl_argmin(base, h, box).argmin;
  if (base.rho2 > base.rho1) report.condition7 = condition7_check(h.h, base.rho1, base.rho2, box);

  const std::size_t R = settings.replicates;
  for (std::size_t t = 0; t < settings.durations.size(); ++t) {
    const double T = settings.durations[t];
    std::vector<double> est(R, std::numeric_limits<double>::quiet_NaN());
    parallel_for(R, settings.workers, [&](std::size_t i) {
      try {
        const auto path = simulate_path(truth_model, T, settings.dt, RngStream{settings.seed, t * R + i});
        est[i] = mle_threshold(path, fitted, ParamBox{box}).components.front().value;
      } catch (const Error&) {
        // counted below
      }
    });
    MisspecRow row;
    row.duration = T;
    row.replicates = R;
    std::vector<double> sorted;
    for (double e : est) {
      if (std::isnan(e)) {
        ++row.failures;
      } else {
        sorted.push_back(e);
      }
    }
    row.estimates = std::move(est);
    std::sort(sorted.begin(), sorted.end());
    row.median_estimate = quantile_sorted(sorted, 0.5);
    double sum = 0.0;
    for (double e : sorted) sum += e;
    row.mean_estimate = sorted.empty() ? row.median_estimate : sum / static_cast<double>(sorted.size());
    row.median_bias = row.median_estimate - base.theta;
    row.iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace tdiff
