#pragma once

#include <limits>

#include "tdiff/model.hpp"
#include "tdiff/path.hpp"
#include "tdiff/rng.hpp"

namespace tdiff {

/// How X_0 is chosen.
struct InitRule {
  enum class Kind { Fixed, Stationary, Burnin };

  Kind kind = Kind::Stationary;
  double x0 = 0.0;
  /// Burn-in duration; NaN means 10 / (smallest rate), or 10 without rates.
  double burnin = std::numeric_limits<double>::quiet_NaN();

  static InitRule fixed(double x) { return {Kind::Fixed, x, 0.0}; }
  static InitRule stationary() { return {Kind::Stationary, 0.0, 0.0}; }
  static InitRule burn_in(double from, double duration = std::numeric_limits<double>::quiet_NaN()) {
    return {Kind::Burnin, from, duration};
  }
};

struct SimOptions {
  /// Any |X| above this aborts with NumericalBlowup.
  double blowup_guard = 1e6;
};

/// Euler-Maruyama path with n = round(T / dt) steps,
/// X_{i+1} = X_i + S(X_i) dt + sigma(X_i) sqrt(dt) Z_i.
/// The regime of X_i follows the model's band convention.
Path simulate_path(const ModelSpec& model, double duration, double dt, RngStream rng,
                   InitRule init = InitRule::stationary(), SimOptions options = {});

}  // namespace tdiff
