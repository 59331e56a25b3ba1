#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tdiff/model.hpp"

namespace tdiff {

/// Uniformly sampled trajectory X_{t0}, X_{t0+dt}, ..., X_{t0+n dt}.
struct Path {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> values;
  std::string sigma_used;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string model_id;

  std::size_t steps() const noexcept { return values.empty() ? 0 : values.size() - 1; }
  double duration() const noexcept { return static_cast<double>(steps()) * dt; }
  /// dt > 0, at least two samples, all finite. Throws InvalidArgument.
  void validate() const;
};

/// Non-owning window onto a contiguous run of samples. All estimators take
/// views so that sub-paths such as [sqrt(T), T] cost nothing.
struct PathView {
  std::span<const double> values;
  double dt = 0.0;
  double t0 = 0.0;

  PathView() = default;
  PathView(std::span<const double> v, double step, double start = 0.0)
      : values(v), dt(step), t0(start) {}
  PathView(const Path& p) : values(p.values), dt(p.dt), t0(p.t0) {}  // NOLINT

  std::size_t steps() const noexcept { return values.empty() ? 0 : values.size() - 1; }
  double duration() const noexcept { return static_cast<double>(steps()) * dt; }
  double operator[](std::size_t i) const { return values[i]; }

  /// Samples first..last inclusive (step indices), i.e. the sub-path on
  /// [t0 + first dt, t0 + last dt].
  PathView slice(std::size_t first, std::size_t last) const;
};

/// Number of steps covering sqrt(T) time units: floor(sqrt(T) / dt).
std::size_t sqrt_horizon_steps(double duration, double dt);

/// Left-point occupation estimate (1/n) sum_{i<n} 1{X_i < x}.
double empirical_cdf(PathView path, double x);

/// Same estimator for many x: sorts the left-point samples once.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(PathView path);

  double operator()(double x) const;
  double min() const noexcept { return sorted_.front(); }
  double max() const noexcept { return sorted_.back(); }
  const std::vector<double>& sorted() const noexcept { return sorted_; }

 private:
  std::vector<double> sorted_;
};

/// Semimartingale local time at x by the Tanaka-Meyer identity
/// |X_T - x| - |X_0 - x| - sum sgn(X_i - x) dX_i, with sgn(0) = 0.
double tanaka_local_time(PathView path, double x);

/// Local-time density estimate Lambda_T(x) / (T sigma(x)^2).
double local_time_density(PathView path, const ModelSpec& model, double x);

/// Gaussian-kernel occupation density (1/n) sum K_h(X_i - x), an independent
/// cross-check of the local-time estimate.
double kernel_occupation_density(PathView path, double x, double bandwidth);

/// CSV with header `t,x` plus a JSON sidecar `<file>.json` carrying dt, t0,
/// seed, stream and model id.
void write_path_csv(const Path& path, const std::string& file);
Path read_path_csv(const std::string& file);

}  // namespace tdiff
