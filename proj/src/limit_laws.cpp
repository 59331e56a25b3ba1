#include "tdiff/limit_laws.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/zeta.hpp>

#include "tdiff/error.hpp"
#include "tdiff/parallel.hpp"

namespace tdiff {

namespace {

// -zeta(1/2) / sqrt(2 pi): expected shortfall of a discretely monitored
// Brownian maximum, in units of sqrt(step).
constexpr double kDiscreteMaxShift = 0.5825971579390106;

}  // namespace

std::string_view to_string(Functional tag) noexcept {
  switch (tag) {
    case Functional::ArgmaxU: return "ArgmaxU";
    case Functional::BayesU: return "BayesU";
    case Functional::IntW2_01: return "IntW2_01";
    case Functional::SupAbsW_01: return "SupAbsW_01";
    case Functional::IntW2Exp: return "IntW2Exp";
  }
  return "Unknown";
}

std::optional<Functional> functional_from_string(std::string_view name) noexcept {
  for (auto tag : {Functional::ArgmaxU, Functional::BayesU, Functional::IntW2_01, Functional::SupAbsW_01,
                   Functional::IntW2Exp}) {
    if (to_string(tag) == name) return tag;
  }
  return std::nullopt;
}

double bayes_second_moment() { return 16.0 * boost::math::zeta(3.0); }

FieldDraw sample_uhat_utilde(const FieldGrid& grid, Sampler& sampler) {
  if (!(grid.half_width > 0.0) || !(grid.step > 0.0) || grid.step > grid.half_width) {
    fail(ErrorKind::InvalidArgument, "field grid needs 0 < step <= half width");
  }
  const auto half = static_cast<std::size_t>(std::llround(grid.half_width / grid.step));
  const double h = grid.step;
  const double sd = std::sqrt(h);
  // log Z on u = -half*h .. half*h, stored at offset `half`.
  thread_local std::vector<double> field;
  field.assign(2 * half + 1, 0.0);

  FieldDraw draw;
  while (true) {
    double w = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
      w += sd * sampler.normal();
      field[half + k] = w - 0.5 * static_cast<double>(k) * h;
    }
    w = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
      w += sd * sampler.normal();
      field[half - k] = w - 0.5 * static_cast<double>(k) * h;
    }
    field[half] = 0.0;
    const auto top = std::max_element(field.begin(), field.end());
    const auto idx = static_cast<std::size_t>(top - field.begin());
    if (idx == 0 || idx == field.size() - 1) {
      ++draw.boundary_hits;
      continue;
    }
    const double peak = *top;
    double mass = 0.0;
    double moment = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
      const double u = (static_cast<double>(i) - static_cast<double>(half)) * h;
      const double weight = (i == 0 || i + 1 == field.size()) ? 0.5 : 1.0;
      const double z = weight * std::exp(field[i] - peak);
      mass += z;
      moment += u * z;
    }
    draw.argmax = (static_cast<double>(idx) - static_cast<double>(half)) * h;
    draw.posterior_mean = moment / mass;
    return draw;
  }
}

FieldDraw sample_uhat_utilde(const FieldGrid& grid, RngStream rng) {
  Sampler sampler(rng);
  return sample_uhat_utilde(grid, sampler);
}

double sample_functional(Functional tag, const FunctionalGrid& grid, Sampler& sampler) {
  const double h = grid.step;
  if (!(h > 0.0)) fail(ErrorKind::InvalidArgument, "functional grid step must be positive");
  const double sd = std::sqrt(h);
  switch (tag) {
    case Functional::IntW2_01: {
      const auto n = static_cast<std::size_t>(std::llround(1.0 / h));
      double w = 0.0, sum = 0.0, last = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        w += sd * sampler.normal();
        last = w * w;
        sum += last;
      }
      return h * (sum - 0.5 * last);
    }
    case Functional::SupAbsW_01: {
      const auto n = static_cast<std::size_t>(std::llround(1.0 / h));
      double w = 0.0, top = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        w += sd * sampler.normal();
        top = std::max(top, std::abs(w));
      }
      return top + kDiscreteMaxShift * sd;
    }
    case Functional::IntW2Exp: {
      const auto n = static_cast<std::size_t>(std::llround(grid.exp_horizon / h));
      const double decay = std::exp(-h);
      double w = 0.0, sum = 0.0, weight = 1.0, last = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        w += sd * sampler.normal();
        weight *= decay;
        last = w * w * weight;
        sum += last;
      }
      return h * (sum - 0.5 * last);
    }
    case Functional::ArgmaxU:
    case Functional::BayesU:
      break;
  }
  fail(ErrorKind::InvalidArgument, "field functionals are sampled with sample_uhat_utilde");
}

double LimitLawSamples::mean() const {
  if (samples.empty()) return 0.0;
  return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
}

double LimitLawSamples::variance() const {
  if (samples.size() < 2) return 0.0;
  const double m = mean();
  double ss = 0.0;
  for (double v : samples) ss += (v - m) * (v - m);
  return ss / static_cast<double>(samples.size() - 1);
}

double LimitLawSamples::second_moment() const {
  if (samples.empty()) return 0.0;
  double ss = 0.0;
  for (double v : samples) ss += v * v;
  return ss / static_cast<double>(samples.size());
}

FieldSamples sample_field_batch(std::size_t draws, const FieldGrid& grid, std::uint64_t seed, unsigned workers) {
  std::vector<FieldDraw> out(draws);
  parallel_for(draws, workers, [&](std::size_t i) { out[i] = sample_uhat_utilde(grid, RngStream{seed, i}); });
  FieldSamples s;
  s.argmax = {Functional::ArgmaxU, grid.half_width, grid.step, {}, seed, 0};
  s.posterior_mean = {Functional::BayesU, grid.half_width, grid.step, {}, seed, 0};
  s.argmax.samples.reserve(draws);
  s.posterior_mean.samples.reserve(draws);
  for (const auto& d : out) {
    s.argmax.samples.push_back(d.argmax);
    s.posterior_mean.samples.push_back(d.posterior_mean);
    s.argmax.boundary_hits += d.boundary_hits;
  }
  s.posterior_mean.boundary_hits = s.argmax.boundary_hits;
  return s;
}

LimitLawSamples sample_functional_batch(Functional tag, std::size_t draws, const FunctionalGrid& grid,
                                        std::uint64_t seed, unsigned workers) {
  LimitLawSamples s;
  s.tag = tag;
  s.horizon = tag == Functional::IntW2Exp ? grid.exp_horizon : 1.0;
  s.step = grid.step;
  s.seed = seed;
  s.samples.resize(draws);
  parallel_for(draws, workers, [&](std::size_t i) {
    Sampler sampler(RngStream{seed, i});
    s.samples[i] = sample_functional(tag, grid, sampler);
  });
  return s;
}

namespace {

// 1-based rank of the (1 - alpha) inverse-ECDF quantile.
std::size_t quantile_rank(double alpha, std::size_t n) {
  const double target = (1.0 - alpha) * static_cast<double>(n);
  auto rank = static_cast<std::size_t>(std::ceil(target - 1e-9));
  return std::clamp<std::size_t>(rank, 1, n);
}

}  // namespace

QuantileTable quantile_table(Functional tag, std::vector<double> samples, const std::vector<double>& alphas,
                             std::uint64_t seed, std::size_t bootstrap) {
  if (samples.empty()) fail(ErrorKind::InvalidArgument, "quantile table needs samples");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();

  QuantileTable table;
  table.tag = tag;
  table.replicates = n;
  table.seed = seed;
  double sum = 0.0;
  for (double v : samples) sum += v;
  table.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : samples) ss += (v - table.mean) * (v - table.mean);
  table.variance = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;

  std::vector<double> sorted_alpha = alphas;
  std::sort(sorted_alpha.begin(), sorted_alpha.end());
  sorted_alpha.erase(std::unique(sorted_alpha.begin(), sorted_alpha.end()), sorted_alpha.end());
  std::vector<std::size_t> ranks(sorted_alpha.size());
  for (std::size_t a = 0; a < ranks.size(); ++a) ranks[a] = quantile_rank(sorted_alpha[a], n);

  // Bootstrap: a resample's order statistics are the original ones repeated
  // by multinomial counts, so one cumulative scan per resample suffices.
  std::vector<double> boot_sum(ranks.size(), 0.0), boot_sq(ranks.size(), 0.0);
  if (bootstrap > 1) {
    Sampler sampler(RngStream{seed, 0}.substream(0xb007));
    std::vector<std::uint32_t> counts(n);
    // Ranks sorted ascending correspond to alphas descending.
    std::vector<std::size_t> order(ranks.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });
    for (std::size_t b = 0; b < bootstrap; ++b) {
      std::fill(counts.begin(), counts.end(), 0u);
      for (std::size_t i = 0; i < n; ++i) {
        auto j = static_cast<std::size_t>(sampler.uniform() * static_cast<double>(n));
        counts[std::min(j, n - 1)] += 1;
      }
      std::size_t cum = 0, pos = 0;
      for (std::size_t o : order) {
        while (cum + counts[pos] < ranks[o]) cum += counts[pos++];
        const double q = samples[pos];
        boot_sum[o] += q;
        boot_sq[o] += q * q;
      }
    }
  }
  for (std::size_t a = 0; a < ranks.size(); ++a) {
    QuantileEntry e;
    e.alpha = sorted_alpha[a];
    e.threshold = samples[ranks[a] - 1];
    if (bootstrap > 1) {
      const double b = static_cast<double>(bootstrap);
      const double m = boot_sum[a] / b;
      e.se = std::sqrt(std::max(0.0, (boot_sq[a] / b - m * m) * b / (b - 1.0)));
    }
    table.entries.push_back(e);
  }
  return table;
}

QuantileTable build_quantile_table(Functional tag, const std::vector<double>& alphas, std::size_t replicates,
                                   std::uint64_t seed, unsigned workers, FunctionalGrid grid) {
  auto draws = sample_functional_batch(tag, replicates, grid, seed, workers);
  auto table = quantile_table(tag, std::move(draws.samples), alphas, seed);
  table.grid = grid.step;
  return table;
}

std::vector<double> dense_alpha_grid() {
  std::vector<double> out;
  for (int k = 1; k <= 999; ++k) out.push_back(k / 1000.0);
  return out;
}

double QuantileTable::threshold(double alpha) const {
  if (entries.empty()) fail(ErrorKind::InvalidArgument, "empty quantile table");
  const auto it = std::lower_bound(entries.begin(), entries.end(), alpha,
                                   [](const QuantileEntry& e, double a) { return e.alpha < a; });
  if (it != entries.end() && std::abs(it->alpha - alpha) <= 1e-12) return it->threshold;
  if (it == entries.begin() || it == entries.end()) {
    fail(ErrorKind::InvalidArgument, "alpha " + std::to_string(alpha) + " outside the tabulated range");
  }
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (alpha - lo.alpha) / (hi.alpha - lo.alpha);
  return lo.threshold + w * (hi.threshold - lo.threshold);
}

double QuantileTable::cdf(double x) const {
  if (entries.empty()) fail(ErrorKind::InvalidArgument, "empty quantile table");
  // Thresholds decrease as alpha grows; walk from the largest alpha.
  if (x <= entries.back().threshold) return 1.0 - entries.back().alpha;
  if (x >= entries.front().threshold) return 1.0 - entries.front().alpha;
  for (std::size_t k = entries.size() - 1; k > 0; --k) {
    const auto& lo = entries[k];      // smaller threshold
    const auto& hi = entries[k - 1];  // larger threshold
    if (x <= hi.threshold) {
      const double span = hi.threshold - lo.threshold;
      const double w = span > 0.0 ? (x - lo.threshold) / span : 1.0;
      return 1.0 - (lo.alpha + w * (hi.alpha - lo.alpha));
    }
  }
  return 1.0 - entries.front().alpha;
}

double ks_distance_to_table(const std::vector<double>& samples, const QuantileTable& table) {
  if (samples.empty()) fail(ErrorKind::InvalidArgument, "KS distance needs samples");
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (const auto& e : table.entries) {
    const double target = 1.0 - e.alpha;
    const double at = static_cast<double>(std::upper_bound(s.begin(), s.end(), e.threshold) - s.begin()) / n;
    const double before = static_cast<double>(std::lower_bound(s.begin(), s.end(), e.threshold) - s.begin()) / n;
    d = std::max({d, std::abs(at - target), std::abs(before - target)});
  }
  return d;
}

ErrorScale predicted_error_scale(const ModelSpec& model, std::size_t j, GammaVariant variant) {
  const double g2 = gamma_sq(model, j, variant);
  const double g4 = g2 * g2;
  return {kArgmaxSecondMoment / g4, bayes_second_moment() / g4};
}

}  // namespace tdiff
