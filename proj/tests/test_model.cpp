#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "oracles.hpp"
#include "tdiff/density.hpp"
#include "tdiff/error.hpp"
#include "tdiff/limit_laws.hpp"
#include "tdiff/model.hpp"

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

double total_mass(const ModelSpec& m) {
  const auto& d = m.density();
  const auto th = m.thresholds();
  return oracle::simpson_split([&](double x) { return d.pdf(x); }, d.lower(), d.upper(), th, 4000);
}

}  // namespace

TEST_CASE("trend evaluation follows the band conventions") {
  const ModelSpec tou = Tou{1.0, 2.0, 1.0, 1.0};
  CHECK(trend_eval(tou, 0.5) == doctest::Approx(-0.5));
  CHECK(trend_eval(tou, 1.0) == doctest::Approx(-2.0));
  CHECK(trend_eval(ModelSpec(SimpleSwitching{1.0, 1.0, 0.0}), 0.3) == doctest::Approx(-1.0));
  CHECK(trend_eval(ModelSpec(SimpleSwitching{1.0, 1.0, 0.0}), 0.0) == doctest::Approx(-1.0));
  CHECK(trend_eval(ModelSpec(SimpleThreshold{1.5, 2.5, 1.0, 0.2}), 0.1) == doctest::Approx(1.5));
  CHECK(trend_eval(ModelSpec(SimpleThreshold{1.5, 2.5, 1.0, 0.2}), 0.2) == doctest::Approx(-2.5));

  // Banded models: x = theta_j belongs to the band below.
  const ModelSpec multi = MultiThresholdOu{{1.0, 2.0, 3.0}, {-1.0, 1.0}, 1.0};
  CHECK(multi.regime(-1.0) == 0);
  CHECK(multi.regime(-0.999) == 1);
  CHECK(multi.regime(1.0) == 1);
  CHECK(multi.regime(1.0001) == 2);
  CHECK(trend_eval(multi, 1.0) == doctest::Approx(-2.0));
}

TEST_CASE("multi-threshold OU with equal rates is a plain OU") {
  const ModelSpec multi = MultiThresholdOu{{1.7, 1.7, 1.7, 1.7}, {-2.0, 0.5, 3.0}, 0.8};
  for (double x = -6.0; x <= 6.0; x += 0.37) CHECK(trend_eval(multi, x) == doctest::Approx(-1.7 * x));
  CHECK_FALSE(multi.identifiable());
}

TEST_CASE("invariant density closed forms") {
  SUBCASE("Laplace law of the switching model") {
    CHECK(invariant_density(ModelSpec(SimpleSwitching{1.0, 1.0, 0.0}), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
    const ModelSpec m = SimpleSwitching{0.7, 1.3, -0.4};
    for (double x : {-3.0, -0.4, 0.0, 1.5}) {
      const double expect = 0.7 / (1.3 * 1.3) * std::exp(-2.0 * 0.7 * std::abs(x + 0.4) / (1.3 * 1.3));
      CHECK(invariant_density(m, x) == doctest::Approx(expect).epsilon(1e-10));
    }
  }
  SUBCASE("simple threshold normalizer") {
    const double r1 = 1.3, r2 = 0.6, s = 0.9, th = 0.4;
    const double G = s * s * (r1 + r2) / (2.0 * r1 * r2);
    CHECK(invariant_density(ModelSpec(SimpleThreshold{r1, r2, s, th}), th) == doctest::Approx(1.0 / G).epsilon(1e-10));
  }
  SUBCASE("TOU against the Gaussian-tail oracle") {
    const oracle::TouDensity o{1.0, 4.0, 1.0, 1.0};
    const ModelSpec m = Tou{1.0, 4.0, 1.0, 1.0};
    for (double x : {-2.5, -1.0, 0.0, 0.7, 0.999, 1.0, 1.3, 2.0}) {
      CHECK(m.density().pdf(x) == doctest::Approx(o.pdf(x)).epsilon(1e-9));
      CHECK(m.density().cdf(x) == doctest::Approx(o.cdf(x)).epsilon(1e-9));
    }
  }
  SUBCASE("general affine model reproduces TOU") {
    const ModelSpec tou = Tou{0.8, 2.2, 1.1, -0.5};
    const ModelSpec gen = GeneralThreshold::from_affine({{0.0, -0.8}, {0.0, -2.2}}, {-0.5}, 1.1);
    for (double x : {-3.0, -0.6, -0.5, 0.1, 1.7}) {
      CHECK(gen.density().pdf(x) == doctest::Approx(tou.density().pdf(x)).epsilon(1e-8));
    }
  }
}

TEST_CASE("density of a state-dependent noise model matches a grid oracle") {
  GeneralThreshold g;
  g.trends = {[](double x) { return -0.5 * x + 0.3; }, [](double x) { return -1.5 * x; }};
  g.sigma = [](double x) { return 0.8 + 0.3 * std::tanh(x); };
  g.thresholds = {0.25};
  const ModelSpec m(g);
  auto S = [&](double x) { return m.trend(x); };
  auto sig = [&](double x) { return m.sigma(x); };
  const oracle::GridDensity o(S, sig, -8.0, 8.0, 400000);
  for (double x : {-2.0, -0.5, 0.2, 0.3, 1.0, 2.5}) {
    CHECK(m.density().pdf(x) == doctest::Approx(o.pdf(x)).epsilon(1e-5));
  }
  CHECK(total_mass(m) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("property: densities integrate to one and solve the stationary balance") {
  std::mt19937_64 g(17);
  std::uniform_real_distribution<double> rate(0.3, 4.0), noise(0.4, 2.0), level(-2.0, 2.0);
  for (int trial = 0; trial < 12; ++trial) {
    std::vector<ModelSpec> models{
        Tou{rate(g), rate(g), noise(g), level(g)},
        SimpleThreshold{rate(g), rate(g), noise(g), level(g)},
        SimpleSwitching{rate(g), noise(g), level(g)},
    };
    double a = level(g), b = level(g);
    if (a > b) std::swap(a, b);
    if (b - a < 0.2) b = a + 0.2;
    models.push_back(MultiThresholdOu{{rate(g), rate(g), rate(g)}, {a, b}, noise(g)});
    for (const auto& m : models) {
      CAPTURE(m.describe());
      CHECK(total_mass(m) == doctest::Approx(1.0).epsilon(1e-8));
      const auto& d = m.density();
      CHECK(d.cdf(d.upper()) == doctest::Approx(1.0).epsilon(1e-12));
      // Zero probability flux: (sigma^2 f)' = 2 S f away from the thresholds.
      for (double x : {-1.7, -0.3, 0.45, 1.9}) {
        bool near = false;
        for (double t : m.thresholds()) near = near || std::abs(x - t) < 1e-2;
        if (near) continue;
        const double h = 1e-5;
        auto sf = [&](double y) { return m.sigma(y) * m.sigma(y) * d.pdf(y); };
        const double lhs = (sf(x + h) - sf(x - h)) / (2.0 * h);
        const double rhs = 2.0 * m.trend(x) * d.pdf(x);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5).scale(d.pdf(x)));
      }
      // Constant noise: the density is continuous across every threshold.
      for (double t : m.thresholds()) {
        CHECK(d.pdf(t - 1e-9) == doctest::Approx(d.pdf(t + 1e-9)).epsilon(1e-6));
      }
      for (double u : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999999}) {
        CHECK(d.cdf(d.quantile(u)) == doctest::Approx(u).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("singularity scale closed forms") {
  CHECK(gamma_sq(ModelSpec(SimpleThreshold{1.0, 2.0, 1.0, 0.0}), 0) == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(gamma_sq(ModelSpec(SimpleSwitching{1.0, 1.0, 0.0}), 0) == doctest::Approx(4.0).epsilon(1e-12));

  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> rate(0.2, 5.0), noise(0.3, 3.0), level(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const double r1 = rate(g), r2 = rate(g), s = noise(g), th = level(g);
    const double st = gamma_sq(ModelSpec(SimpleThreshold{r1, r2, s, th}), 0);
    CHECK(st == doctest::Approx(2.0 * r1 * r2 * (r1 + r2) / std::pow(s, 4)).epsilon(1e-10));
    const double sw = gamma_sq(ModelSpec(SimpleSwitching{r1, s, th}), 0);
    CHECK(sw == doctest::Approx(4.0 * r1 * r1 * r1 / std::pow(s, 4)).epsilon(1e-10));
    // TOU: (rho2 - rho1)^2 theta^2 / (G sigma^2) with G the oracle normalizer.
    const oracle::TouDensity o{r1, r2, s, th};
    const double tou = gamma_sq(ModelSpec(Tou{r1, r2, s, th}), 0);
    CHECK(tou == doctest::Approx((r2 - r1) * (r2 - r1) * th * th / (o.normalizer() * s * s)).epsilon(1e-9));
    const double printed = gamma_sq(ModelSpec(Tou{r1, r2, s, th}), 0, GammaVariant::PrintedTou);
    CHECK(printed == doctest::Approx(tou * std::exp(-r1 * r1 * th * th / (s * s))).epsilon(1e-12));
  }
  CHECK(throws_kind(ErrorKind::InvalidArgument, [] {
    gamma_sq(ModelSpec(SimpleSwitching{1.0, 1.0, 0.0}), 0, GammaVariant::PrintedTou);
  }));
  CHECK(throws_kind(ErrorKind::IndexOutOfRange, [] { gamma_sq(ModelSpec(Tou{1, 2, 1, 1}), 1); }));
}

TEST_CASE("predicted error scales") {
  const auto sw = predicted_error_scale(ModelSpec(SimpleSwitching{1.0, 1.0, 0.0}), 0);
  CHECK(sw.mle == doctest::Approx(1.625).epsilon(1e-12));
  CHECK(sw.bayes == doctest::Approx(oracle::apery()).epsilon(1e-12));
  // Reflection x -> -x swaps the regimes of the simple threshold model.
  const auto a = predicted_error_scale(ModelSpec(SimpleThreshold{0.7, 1.9, 1.2, 0.3}), 0);
  const auto b = predicted_error_scale(ModelSpec(SimpleThreshold{1.9, 0.7, 1.2, -0.3}), 0);
  CHECK(a.mle == doctest::Approx(b.mle).epsilon(1e-12));
  CHECK(a.bayes == doctest::Approx(b.bayes).epsilon(1e-12));
}

TEST_CASE("model validation") {
  CHECK(throws_kind(ErrorKind::InvalidModel, [] { ModelSpec(Tou{-1.0, 2.0, 1.0, 1.0}).validate(); }));
  CHECK(throws_kind(ErrorKind::InvalidModel, [] { ModelSpec(SimpleSwitching{1.0, 0.0, 0.0}).validate(); }));
  CHECK(throws_kind(ErrorKind::InvalidThresholdOrder,
                    [] { ModelSpec(MultiThresholdOu{{1, 2, 3}, {1.0, -1.0}, 1.0}).validate(); }));
  CHECK(throws_kind(ErrorKind::InvalidModel, [] { ModelSpec(MultiThresholdOu{{1, 2}, {}, 1.0}).validate(); }));
  CHECK(throws_kind(ErrorKind::NonErgodicModel, [] {
    ModelSpec(GeneralThreshold::from_affine({{0.0, -1.0}, {0.0, 0.5}}, {0.0}, 1.0)).density();
  }));
  CHECK_FALSE(ModelSpec(Tou{1.0, 1.0, 1.0, 1.0}).identifiable());
  CHECK_FALSE(ModelSpec(Tou{1.0, 2.0, 1.0, 0.0}).identifiable());
  CHECK(ModelSpec(Tou{1.0, 2.0, 1.0, 1.0}).identifiable());
  CHECK(throws_kind(ErrorKind::InvalidThresholdOrder, [] { ParamBox{{0.0, 1.0}, {0.5, 2.0}}.validate_ordered(); }));
}

TEST_CASE("density cache is shared and safe to populate concurrently") {
  const ModelSpec m = Tou{1.0, 3.0, 1.0, 0.5};
  const ModelSpec copy = m;
  std::vector<const InvariantDensity*> seen(8, nullptr);
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    pool.emplace_back([&, i] { seen[i] = &(i % 2 ? copy : m).density(); });
  }
  for (auto& t : pool) t.join();
  for (auto* p : seen) CHECK(p == seen.front());
  const auto moved = m.with_thresholds(std::vector<double>{0.7});
  CHECK(&moved.density() != seen.front());
  CHECK(moved.thresholds().front() == 0.7);
}
