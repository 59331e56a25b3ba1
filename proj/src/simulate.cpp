#include "tdiff/simulate.hpp"

#include <cmath>
#include <sstream>
#include <variant>

#include "tdiff/density.hpp"
#include "tdiff/error.hpp"

namespace tdiff {

namespace {

// Runs `steps` Euler steps starting from values[0], writing values[1..steps].
template <class Drift, class Noise>
void euler(double* values, std::size_t steps, double dt, Sampler& sampler, const Drift& drift,
           const Noise& noise, double guard) {
  const double root_dt = std::sqrt(dt);
  double x = values[0];
  for (std::size_t i = 0; i < steps; ++i) {
    x = x + drift(x) * dt + noise(x) * root_dt * sampler.normal();
    if (!(std::abs(x) <= guard)) {
      std::ostringstream msg;
      msg << "path left the guard band |x| <= " << guard << " at step " << i + 1 << " (x = " << x << ")";
      fail(ErrorKind::NumericalBlowup, msg.str());
    }
    values[i + 1] = x;
  }
}

void run(const ModelSpec& model, double* values, std::size_t steps, double dt, Sampler& sampler,
         double guard) {
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Tou>) {
          const double r1 = m.rho1, r2 = m.rho2, th = m.theta, s = m.sigma;
          euler(values, steps, dt, sampler, [=](double x) { return x < th ? -r1 * x : -r2 * x; },
                [=](double) { return s; }, guard);
        } else if constexpr (std::is_same_v<M, SimpleThreshold>) {
          const double r1 = m.rho1, r2 = m.rho2, th = m.theta, s = m.sigma;
          euler(values, steps, dt, sampler, [=](double x) { return x < th ? r1 : -r2; },
                [=](double) { return s; }, guard);
        } else if constexpr (std::is_same_v<M, SimpleSwitching>) {
          const double r = m.rho, th = m.theta, s = m.sigma;
          euler(values, steps, dt, sampler, [=](double x) { return x < th ? r : -r; },
                [=](double) { return s; }, guard);
        } else if constexpr (std::is_same_v<M, MultiThresholdOu>) {
          const double s = m.sigma;
          euler(values, steps, dt, sampler, [&model](double x) { return model.trend(x); },
                [=](double) { return s; }, guard);
        } else {
          euler(values, steps, dt, sampler, [&model](double x) { return model.trend(x); },
                [&model](double x) { return model.sigma(x); }, guard);
        }
      },
      model.variant());
}

}  // namespace

Path simulate_path(const ModelSpec& model, double duration, double dt, RngStream rng, InitRule init,
                   SimOptions options) {
  model.validate_simulable();
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorKind::InvalidArgument, "dt must be positive");
  if (!(duration >= dt) || !std::isfinite(duration)) {
    fail(ErrorKind::InvalidArgument, "duration T must be finite and at least dt");
  }
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));

  Sampler sampler(rng);
  double x0 = init.x0;
  switch (init.kind) {
    case InitRule::Kind::Fixed:
      break;
    case InitRule::Kind::Stationary:
      x0 = model.density().quantile(sampler.uniform());
      break;
    case InitRule::Kind::Burnin: {
      double burn = init.burnin;
      if (std::isnan(burn)) {
        const auto rate = model.min_rate();
        burn = rate && *rate > 0.0 ? 10.0 / *rate : 10.0;
      }
      const auto burn_steps = static_cast<std::size_t>(std::llround(burn / dt));
      std::vector<double> scratch(burn_steps + 1);
      scratch[0] = init.x0;
      run(model, scratch.data(), burn_steps, dt, sampler, options.blowup_guard);
      x0 = scratch.back();
      break;
    }
  }
  if (!std::isfinite(x0)) fail(ErrorKind::InvalidArgument, "initial value is not finite");

  Path path;
  path.dt = dt;
  path.seed = rng.seed;
  path.stream = rng.index;
  path.model_id = model.describe();
  const auto cs = model.constant_sigma();
  path.sigma_used = cs ? std::to_string(*cs) : std::string("callable");
  path.values.resize(steps + 1);
  path.values[0] = x0;
  run(model, path.values.data(), steps, dt, sampler, options.blowup_guard);
  return path;
}

}  // namespace tdiff
