#include "tdiff/gof.hpp"

#include <algorithm>
#include <cmath>

#include "tdiff/error.hpp"
#include "tdiff/quadrature.hpp"

namespace tdiff {

std::string_view to_string(Statistic stat) noexcept {
  switch (stat) {
    case Statistic::W2: return "W2";
    case Statistic::D: return "D";
    case Statistic::V2: return "V2";
  }
  return "Unknown";
}

std::optional<Statistic> statistic_from_string(std::string_view name) noexcept {
  for (auto s : {Statistic::W2, Statistic::D, Statistic::V2}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

Functional null_law(Statistic stat) noexcept {
  switch (stat) {
    case Statistic::W2: return Functional::IntW2_01;
    case Statistic::D: return Functional::SupAbsW_01;
    case Statistic::V2: return Functional::IntW2Exp;
  }
  return Functional::IntW2_01;
}

std::vector<double> inner_process(PathView path, const ModelSpec& model0) {
  const std::size_t n = path.steps();
  std::vector<double> m(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = path[i];
    const double s = model0.sigma(x);
    if (!(s > 0.0)) fail(ErrorKind::DegenerateSigma, "inner process needs sigma(x) > 0");
    m[i + 1] = m[i] + (path[i + 1] - x - model0.trend(x) * path.dt) / s;
  }
  return m;
}

InnerStatistics inner_statistics(PathView path, const ModelSpec& model0) {
  const auto m = inner_process(path, model0);
  const double T = path.duration();
  if (!(T > 0.0)) fail(ErrorKind::InvalidArgument, "statistic needs a path of positive duration");
  double sq = 0.0;
  double top = 0.0;
  for (std::size_t i = 0; i + 1 < m.size(); ++i) sq += m[i] * m[i];
  for (double v : m) top = std::max(top, std::abs(v));
  return {sq * path.dt / (T * T), top / std::sqrt(T)};
}

double w2_statistic(PathView path, const ModelSpec& model0) { return inner_statistics(path, model0).w2; }

double d_statistic(PathView path, const ModelSpec& model0) { return inner_statistics(path, model0).d; }

PsiTable::PsiTable(const ModelSpec& model0) : model_(model0) {
  const auto& dens = model_.density();
  const auto& nodes = dens.nodes();
  grid_.reserve((nodes.size() - 1) * kRefine + 1);
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    for (std::size_t r = 0; r < kRefine; ++r) {
      grid_.push_back(nodes[k] + (nodes[k + 1] - nodes[k]) * static_cast<double>(r) / kRefine);
    }
  }
  grid_.push_back(nodes.back());

  const std::size_t g = grid_.size();
  cum_low_.assign(g, 0.0);
  cum_high_.assign(g, 0.0);
  auto low = [this](double y) { return low_integrand(y); };
  auto high = [this](double y) { return high_integrand(y); };
  for (std::size_t k = 1; k < g; ++k) cum_low_[k] = cum_low_[k - 1] + quad::gauss15(low, grid_[k - 1], grid_[k]);
  for (std::size_t k = g - 1; k-- > 0;) cum_high_[k] = cum_high_[k + 1] + quad::gauss15(high, grid_[k], grid_[k + 1]);

  psi_.resize(g);
  dpsi_.resize(g);
  for (std::size_t k = 0; k < g; ++k) {
    const double x = grid_[k];
    const double F = dens.cdf(x);
    const double S = dens.sf(x);
    if (S > 0.0) {
      const double ratio = F / S;
      psi_[k] = cum_low_[k] + ratio * ratio * cum_high_[k];
      dpsi_[k] = 2.0 * F * dens.pdf(x) * cum_high_[k] / (S * S * S);
    } else {
      psi_[k] = std::numeric_limits<double>::infinity();
      dpsi_[k] = 0.0;
    }
  }
}

double PsiTable::low_integrand(double y) const {
  const auto& dens = model_.density();
  const double F = dens.cdf(y);
  const double s = model_.sigma(y);
  const double f = dens.pdf(y);
  return F == 0.0 ? 0.0 : F * F / (s * s * f);
}

double PsiTable::high_integrand(double y) const {
  const auto& dens = model_.density();
  const double S = dens.sf(y);
  const double s = model_.sigma(y);
  const double f = dens.pdf(y);
  return S == 0.0 ? 0.0 : S * S / (s * s * f);
}

std::size_t PsiTable::cell_of(double x) const {
  if (x <= grid_.front()) return 0;
  if (x >= grid_.back()) return grid_.size() - 2;
  return static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), x) - grid_.begin()) - 1;
}

double PsiTable::lower_integral(double x) const {
  if (x <= grid_.front()) return 0.0;
  if (x >= grid_.back()) return cum_low_.back();
  const std::size_t k = cell_of(x);
  return cum_low_[k] + quad::gauss15([this](double y) { return low_integrand(y); }, grid_[k], x);
}

double PsiTable::upper_integral(double x) const {
  if (x >= grid_.back()) return 0.0;
  if (x <= grid_.front()) return cum_high_.front();
  const std::size_t k = cell_of(x);
  return cum_high_[k + 1] + quad::gauss15([this](double y) { return high_integrand(y); }, x, grid_[k + 1]);
}

double PsiTable::operator()(double x) const {
  const auto& dens = model_.density();
  const double F = dens.cdf(x);
  const double S = dens.sf(x);
  if (S == 0.0) return std::numeric_limits<double>::infinity();
  const double ratio = F / S;
  return lower_integral(x) + ratio * ratio * upper_integral(x);
}

double PsiTable::derivative(double x) const {
  const auto& dens = model_.density();
  const double F = dens.cdf(x);
  const double S = dens.sf(x);
  if (S == 0.0) return 0.0;
  return 2.0 * F * dens.pdf(x) * upper_integral(x) / (S * S * S);
}

double psi_function(const ModelSpec& model0, double x) { return PsiTable(model0)(x); }

PsiWeight exp_weight() {
  return [](double s) { return std::exp(-s); };
}

namespace {

double v2_from_grid_values(const std::vector<double>& fhat, double duration, const PsiTable& psi,
                           const PsiWeight& weight) {
  const auto& grid = psi.grid();
  const auto& dens = psi.density();
  const auto& p = psi.psi_on_grid();
  const auto& dp = psi.derivative_on_grid();
  std::vector<double> integrand(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!std::isfinite(p[k]) || dp[k] == 0.0) continue;
    const double w = weight(p[k]);
    if (w == 0.0) continue;
    const double S = dens.sf(grid[k]);
    const double F = dens.cdf(grid[k]);
    const double z = (fhat[k] - F) / S;
    integrand[k] = dp[k] * w * z * z;
  }
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    total += 0.5 * (integrand[k] + integrand[k + 1]) * (grid[k + 1] - grid[k]);
  }
  return duration * total;
}

}  // namespace

double v2_weighted_from_cdf(const std::function<double(double)>& fhat, double duration, const PsiTable& psi,
                            const PsiWeight& weight) {
  std::vector<double> values(psi.grid().size());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = fhat(psi.grid()[k]);
  return v2_from_grid_values(values, duration, psi, weight);
}

double v2_weighted(PathView path, const PsiTable& psi, const PsiWeight& weight) {
  const std::size_t n = path.steps();
  if (n == 0) fail(ErrorKind::InvalidArgument, "statistic needs a path of positive duration");
  const auto& grid = psi.grid();
  // counts[k] = samples in [grid[k-1], grid[k]); Fhat(grid[k]) = sum_{m<=k} counts[m] / n.
  std::vector<std::size_t> counts(grid.size() + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), path[i]) - grid.begin());
    ++counts[idx];
  }
  std::vector<double> fhat(grid.size());
  std::size_t cum = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    cum += counts[k];
    fhat[k] = static_cast<double>(cum) / static_cast<double>(n);
  }
  return v2_from_grid_values(fhat, path.duration(), psi, weight);
}

double v2_weighted(PathView path, const ModelSpec& model0, const PsiWeight& weight) {
  return v2_weighted(path, PsiTable(model0), weight);
}

double compute_statistic(Statistic stat, PathView path, const ModelSpec& model0) {
  switch (stat) {
    case Statistic::W2: return w2_statistic(path, model0);
    case Statistic::D: return d_statistic(path, model0);
    case Statistic::V2: return v2_weighted(path, model0);
  }
  return 0.0;
}

GofReport simple_test(PathView path, const ModelSpec& model0, Statistic stat, double alpha,
                      const QuantileTable& table) {
  if (table.tag != null_law(stat)) {
    fail(ErrorKind::InvalidArgument, "quantile table " + std::string(to_string(table.tag)) +
                                         " does not match statistic " + std::string(to_string(stat)));
  }
  GofReport r;
  r.statistic = stat;
  r.alpha = alpha;
  r.value = compute_statistic(stat, path, model0);
  r.threshold = table.threshold(alpha);
  r.reject = r.value > r.threshold;
  r.table = std::string(to_string(table.tag));
  return r;
}

GofReport composite_test(PathView path, const ModelSpec& family, const ParamBox& box, double alpha,
                         Statistic stat, const QuantileTable& table, Method plug_in) {
  const auto est = plug_in == Method::Bayes ? bayes_threshold(path, family, box) : mle_threshold(path, family, box);
  if (est.flat()) fail(ErrorKind::FlatLikelihood, "threshold not identifiable for the plug-in estimate");
  return plug_in_test(path, family, est.point(), alpha, stat, table);
}

GofReport plug_in_test(PathView path, const ModelSpec& family, std::span<const double> thresholds, double alpha,
                       Statistic stat, const QuantileTable& table) {
  auto r = simple_test(path, family.with_thresholds(thresholds), stat, alpha, table);
  r.composite = true;
  r.plug_in.assign(thresholds.begin(), thresholds.end());
  return r;
}

}  // namespace tdiff
