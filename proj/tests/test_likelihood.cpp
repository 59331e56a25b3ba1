#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "tdiff/error.hpp"
#include "tdiff/likelihood.hpp"
#include "tdiff/simulate.hpp"

using namespace tdiff;

namespace {

bool throws_kind(ErrorKind kind, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

Path make_path(std::vector<double> values, double dt) {
  Path p;
  p.dt = dt;
  p.values = std::move(values);
  return p;
}

// Random walk, optionally rounded onto a coarse lattice so that sample values repeat.
std::vector<double> random_walk(std::size_t n, double x0, double step, std::uint64_t seed, double lattice = 0.0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  std::vector<double> x(n + 1);
  x[0] = x0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i + 1] = x[i] + step * z(g) - 0.05 * x[i];
    if (lattice > 0.0) x[i + 1] = lattice * std::round(x[i + 1] / lattice);
  }
  return x;
}

// Random affine multi-regime model with k thresholds spread over [-1.5, 1.5].
ModelSpec random_general(std::mt19937_64& g, std::size_t k, bool state_sigma) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<AffineTrend> pieces;
  for (std::size_t j = 0; j <= k; ++j) pieces.push_back({u(g), -1.0 - std::abs(u(g))});
  std::vector<double> th;
  for (std::size_t j = 0; j < k; ++j) th.push_back(-1.5 + 3.0 * (j + 0.5 + 0.3 * u(g)) / static_cast<double>(k));
  auto gt = GeneralThreshold::from_affine(pieces, th, 0.8 + 0.4 * std::abs(u(g)));
  if (state_sigma) {
    gt.sigma = [](double x) { return 0.7 + 0.2 * std::tanh(x); };
    gt.constant_sigma.reset();
  }
  return gt;
}

}  // namespace

TEST_CASE("TOU log-likelihood") {
  const auto p = make_path(random_walk(60, 0.5, 0.3, 3), 0.01);
  SUBCASE("equal rates make theta irrelevant") {
    const double ref = loglik_tou(p, 1.3, 1.3, 0.9, -10.0);
    for (double th : {-1.0, 0.0, 0.3, 0.7, 10.0}) CHECK(loglik_tou(p, 1.3, 1.3, 0.9, th) == doctest::Approx(ref).epsilon(1e-12));
  }
  SUBCASE("differences are sums of per-sample contributions") {
    const double r1 = 0.7, r2 = 2.1, s = 0.9;
    for (double a : {-0.3, 0.1, 0.4}) {
      for (double b : {0.2, 0.5, 0.9}) {
        if (b <= a) continue;
        double direct = 0.0;
        for (std::size_t i = 0; i + 1 < p.values.size(); ++i) {
          const double x = p.values[i], dx = p.values[i + 1] - x;
          if (a <= x && x < b) {
            direct += (-r1 * x - -r2 * x) / (s * s) * dx - (r1 * r1 - r2 * r2) * x * x / (2 * s * s) * p.dt;
          }
        }
        CHECK(loglik_tou(p, r1, r2, s, b) - loglik_tou(p, r1, r2, s, a) == doctest::Approx(direct).epsilon(1e-10));
      }
    }
    CHECK(loglik_tou(p, r1, r2, s, 0.4) - loglik_tou(p, r1, r2, s, 0.4) == 0.0);
  }
  SUBCASE("direct-sum oracle") {
    const double v = oracle::loglik_direct(p.values, p.dt, [](double x) { return x < 0.2 ? -0.5 * x : -3.0 * x; }, 1.1);
    CHECK(loglik_tou(p, 0.5, 3.0, 1.1, 0.2) == doctest::Approx(v).epsilon(1e-12));
  }
  CHECK(throws_kind(ErrorKind::DegenerateSigma, [&] { loglik_tou(p, 1.0, 2.0, 0.0, 0.0); }));
}

TEST_CASE("general log-likelihood specializes to the model formulas") {
  const auto p = make_path(random_walk(200, 0.2, 0.2, 5), 0.01);
  const double tou = loglik_tou(p, 0.8, 1.9, 0.7, 0.1);
  CHECK(loglik_general(p, Tou{0.8, 1.9, 0.7, 0.1}) == doctest::Approx(tou).epsilon(1e-12));
  CHECK(loglik_general(p, GeneralThreshold::from_affine({{0.0, -0.8}, {0.0, -1.9}}, {0.1}, 0.7)) ==
        doctest::Approx(tou).epsilon(1e-12));
  CHECK(loglik_general(p, SimpleThreshold{1.2, 0.6, 0.9, 0.05}) ==
        doctest::Approx(oracle::loglik_direct(p.values, p.dt, [](double x) { return x < 0.05 ? 1.2 : -0.6; }, 0.9))
            .epsilon(1e-12));
  CHECK(loglik_general(p, SimpleSwitching{0.9, 1.1, -0.1}) ==
        doctest::Approx(oracle::loglik_direct(p.values, p.dt, [](double x) { return x < -0.1 ? 0.9 : -0.9; }, 1.1))
            .epsilon(1e-12));
  CHECK(loglik_general(p, MultiThresholdOu{{1.0, 2.0, 0.5}, {-0.1, 0.3}, 0.8}) ==
        doctest::Approx(oracle::loglik_direct(
                            p.values, p.dt, [](double x) { return x <= -0.1 ? -x : x <= 0.3 ? -2.0 * x : -0.5 * x; }, 0.8))
            .epsilon(1e-12));
}

TEST_CASE("general log-likelihood matches a direct sum with state-dependent noise") {
  std::mt19937_64 g(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_general(g, 1 + trial % 3, true);
    const auto p = make_path(random_walk(50, 0.0, 0.4, 100 + trial), 0.02);
    double direct = 0.0;
    for (std::size_t i = 0; i + 1 < p.values.size(); ++i) {
      const double x = p.values[i];
      const double s2 = std::pow(0.7 + 0.2 * std::tanh(x), 2);
      const double S = m.trend(x);
      direct += S / s2 * (p.values[i + 1] - x) - S * S / (2 * s2) * p.dt;
    }
    CHECK(loglik_general(p, m) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("identical trends make the thresholds irrelevant") {
  const auto p = make_path(random_walk(100, 0.0, 0.3, 8), 0.01);
  const auto m = GeneralThreshold::from_affine({{0.2, -1.0}, {0.2, -1.0}, {0.2, -1.0}}, {-0.5, 0.5}, 1.0);
  const double ref = loglik_general(p, m);
  for (const std::vector<double>& th : std::vector<std::vector<double>>{{-1.0, 0.0}, {0.1, 0.2}, {-3.0, 3.0}}) {
    CHECK(loglik_general(p, ModelSpec(m).with_thresholds(th)) == doctest::Approx(ref).epsilon(1e-12));
  }
  for (std::size_t j = 0; j < 2; ++j) {
    for (double c : component_contributions(p, m, j)) CHECK(c == 0.0);
  }
}

TEST_CASE("factorization identity") {
  std::mt19937_64 g(23);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t k = 1 + trial % 3;
    const auto m = random_general(g, k, trial % 2 == 1);
    const auto p = make_path(random_walk(300, 0.0, 0.4, 200 + trial), 0.01);
    std::vector<double> diffs;
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> th(k);
      for (auto& t : th) t = u(g);
      std::sort(th.begin(), th.end());
      const auto mt = m.with_thresholds(th);
      double sum = base_loglik(p, mt);
      for (std::size_t j = 0; j < k; ++j) sum += factorized_loglik(p, mt, j, th[j]);
      diffs.push_back(sum - loglik_general(p, mt));
    }
    const auto [lo, hi] = std::minmax_element(diffs.begin(), diffs.end());
    CHECK(*hi - *lo <= 1e-10);
  }
}

TEST_CASE("factorized oracle and single-threshold argmax equivalence") {
  const auto p = make_path(random_walk(400, 0.8, 0.3, 31), 0.01);
  const ModelSpec m = Tou{0.6, 2.4, 0.8, 1.0};
  const auto Sj = [](double x) { return -0.6 * x; };
  const auto Sj1 = [](double x) { return -2.4 * x; };
  for (double th : {0.2, 0.7, 1.1}) {
    CHECK(factorized_loglik(p, m, 0, th) ==
          doctest::Approx(oracle::factorized_direct(p.values, p.dt, Sj, Sj1, 0.8, th, true)).epsilon(1e-12));
  }
  const ParamInterval box{0.0, 1.6};
  const auto curve = loglik_curve(p, m, 0, box);
  double best = -1e300, best_theta = 0.0;
  for (double th : curve.candidates()) {
    const double v = loglik_general(p, m.with_thresholds(std::vector<double>{th}));
    if (v > best) best = v, best_theta = th;
  }
  CHECK(curve.midpoint(curve.argmax()) == best_theta);
  CHECK(throws_kind(ErrorKind::IndexOutOfRange, [&] { factorized_loglik(p, m, 1, 0.5); }));
}

TEST_CASE("sweep equals pointwise evaluation (property over random models)") {
  std::mt19937_64 g(41);
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t k = 1 + trial % 3;
    const auto m = random_general(g, k, trial % 4 == 3);
    const std::size_t n = 50 + static_cast<std::size_t>(trial) * 19;
    CAPTURE(trial);
    const double lattice = trial % 2 ? 0.05 : 0.0;
    const auto p = make_path(random_walk(n, 0.0, 0.4, 500 + trial, lattice), 0.01);
    for (std::size_t j = 0; j < k; ++j) {
      const ParamInterval box{m.thresholds()[j] - 0.4, m.thresholds()[j] + 0.4};
      const auto curve = loglik_curve(p, m, j, box);
      std::set<double> distinct;
      for (std::size_t i = 0; i < n; ++i) {
        if (box.contains(p.values[i])) distinct.insert(p.values[i]);
      }
      CHECK(curve.breakpoints.size() == distinct.size());
      CHECK(std::is_sorted(curve.breakpoints.begin(), curve.breakpoints.end()));
      CHECK(curve.intervals() == curve.breakpoints.size() + 1);
      double worst = 0.0;
      for (std::size_t q = 0; q < curve.intervals(); ++q) {
        const double v = factorized_loglik(p, m, j, curve.midpoint(q));
        worst = std::max(worst, std::abs(v - curve.values[q]));
      }
      CHECK(worst <= 1e-10);
      // Ties resolve by the band convention: theta on a sample counts it as below.
      for (double b : curve.breakpoints) {
        CHECK(std::abs(curve.value_at(b) - factorized_loglik(p, m, j, b)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("two-regime tie convention in the curve") {
  const auto p = make_path({0.5, 1.0, 0.5, 1.0, 1.5}, 0.1);
  const ModelSpec m = Tou{1.0, 2.0, 1.0, 1.0};
  const auto curve = loglik_curve(p, m, 0, {0.0, 2.0});
  CHECK(curve.breakpoints == std::vector<double>{0.5, 1.0});
  CHECK(curve.value_at(1.0) == doctest::Approx(factorized_loglik(p, m, 0, 1.0)).epsilon(1e-14));
  CHECK(curve.value_at(1.0) == curve.values[1]);
}

TEST_CASE("empty box gives a flat curve") {
  const auto p = make_path({0.1, 0.2, 0.15, 0.3}, 0.1);
  const auto curve = loglik_curve(p, Tou{1.0, 2.0, 1.0, 1.0}, 0, {2.0, 3.0});
  CHECK(curve.empty());
  CHECK(curve.flat());
  CHECK(curve.intervals() == 1);
}

TEST_CASE("shift covariance") {
  const std::vector<AffineTrend> pieces{{0.3, -1.0}, {-0.2, -2.0}, {0.1, -0.7}};
  const auto m = GeneralThreshold::from_affine(pieces, {-0.4, 0.6}, 0.9);
  const auto base = random_walk(300, 0.0, 0.3, 77);
  for (double c : {-2.5, 0.75, 4.0}) {
    std::vector<AffineTrend> moved;
    for (const auto& a : pieces) moved.push_back({a.intercept - a.slope * c, a.slope});
    auto shifted = base;
    for (auto& x : shifted) x += c;
    const auto p = make_path(base, 0.01), q = make_path(shifted, 0.01);
    const auto mc = GeneralThreshold::from_affine(moved, {-0.4 + c, 0.6 + c}, 0.9);
    const std::vector<std::vector<double>> pairs{{-0.8, 0.1}, {-0.2, 0.9}, {0.0, 0.3}};
    for (const auto& th : pairs) {
      const std::vector<double> thc{th[0] + c, th[1] + c};
      const double d1 = loglik_general(p, ModelSpec(m).with_thresholds(th)) - loglik_general(p, m);
      const double d2 = loglik_general(q, ModelSpec(mc).with_thresholds(thc)) - loglik_general(q, mc);
      CHECK(d1 == doctest::Approx(d2).epsilon(1e-9));
    }
    const auto c1 = loglik_curve(p, m, 1, {0.0, 1.2});
    const auto c2 = loglik_curve(q, mc, 1, {c, 1.2 + c});
    REQUIRE(c1.intervals() == c2.intervals());
    for (std::size_t i = 0; i + 1 < c1.intervals(); ++i) {
      CHECK(c1.values[i + 1] - c1.values[i] == doctest::Approx(c2.values[i + 1] - c2.values[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("reversing a closed path keeps the dt part and recomputes the dX part") {
  auto x = random_walk(150, 0.3, 0.3, 13);
  x.push_back(x.front());
  std::vector<double> r(x.rbegin(), x.rend());
  const double dt = 0.01;
  const auto S = [](double v) { return v < 0.2 ? -0.5 * v : -1.7 * v; };
  const ModelSpec m = Tou{0.5, 1.7, 1.0, 0.2};
  // The dt part is linear in dt, so two step sizes separate it from the dX part.
  const auto parts = [&](const std::vector<double>& v) {
    const double a = loglik_general(PathView(v, dt), m), b = loglik_general(PathView(v, 2.0 * dt), m);
    return std::pair{2.0 * a - b, b - a};
  };
  const auto [dx_f, dt_f] = parts(x);
  const auto [dx_r, dt_r] = parts(r);
  CHECK(dt_f == doctest::Approx(dt_r).epsilon(1e-11));
  double direct = 0.0;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) direct += S(r[i]) * (r[i + 1] - r[i]);
  CHECK(dx_r == doctest::Approx(direct).epsilon(1e-10));
  double direct_dt = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) direct_dt -= 0.5 * S(x[i]) * S(x[i]) * dt;
  CHECK(dt_f == doctest::Approx(direct_dt).epsilon(1e-10));
}

TEST_CASE("likelihood errors") {
  const auto p = make_path({0.0, 0.1, 0.2}, 0.1);
  CHECK(throws_kind(ErrorKind::InvalidThresholdOrder, [&] {
    loglik_general(p, GeneralThreshold::from_affine({{0, -1}, {0, -2}, {0, -1}}, {0.5, -0.5}, 1.0));
  }));
  CHECK(throws_kind(ErrorKind::DegenerateSigma, [&] { loglik_general(p, Tou{1.0, 2.0, 0.0, 0.0}); }));
  CHECK(throws_kind(ErrorKind::InvalidArgument, [&] { loglik_curve(p, Tou{}, 0, {1.0, 1.0}); }));
}
