#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tdiff {

using ScalarFn = std::function<double(double)>;

enum class ModelKind { Tou, SimpleThreshold, SimpleSwitching, MultiThresholdOu, GeneralThreshold };

std::string_view to_string(ModelKind kind) noexcept;

/// Which regime owns a state sitting exactly on a threshold. The simulator,
/// the likelihood and the density all use the model's convention.
enum class BandConvention {
  LowerOpen,    ///< two-regime models: regime 0 is {x < theta}, regime 1 is {x >= theta}
  UpperClosed,  ///< multi-regime models: regime j is (theta_{j-1}, theta_j]
};

/// dX = -rho1 X 1{X<theta} dt - rho2 X 1{X>=theta} dt + sigma dW
struct Tou {
  double rho1 = 1.0;
  double rho2 = 2.0;
  double sigma = 1.0;
  double theta = 1.0;
};

/// dX = rho1 1{X<theta} dt - rho2 1{X>=theta} dt + sigma dW
struct SimpleThreshold {
  double rho1 = 1.0;
  double rho2 = 1.0;
  double sigma = 1.0;
  double theta = 0.0;
};

/// dX = -rho sgn(X - theta) dt + sigma dW, with sgn(0) = +1.
struct SimpleSwitching {
  double rho = 1.0;
  double sigma = 1.0;
  double theta = 0.0;
};

/// OU drift -rates[j] x on band (thresholds[j-1], thresholds[j]].
struct MultiThresholdOu {
  std::vector<double> rates;
  std::vector<double> thresholds;
  double sigma = 1.0;
};

struct AffineTrend {
  double intercept = 0.0;
  double slope = 0.0;
};

/// Arbitrary regime trends S_0..S_k and state-dependent noise sigma(x).
/// `affine` and `constant_sigma` are filled when the model was built from
/// serializable pieces; callable-only models cannot be written to config.
struct GeneralThreshold {
  std::vector<ScalarFn> trends;
  ScalarFn sigma;
  std::vector<double> thresholds;
  std::string label = "general";
  std::vector<AffineTrend> affine;
  std::optional<double> constant_sigma;
  /// Points where a trend or sigma is not smooth inside a band; the density
  /// tabulation places nodes there.
  std::vector<double> kinks;

  static GeneralThreshold from_affine(std::vector<AffineTrend> pieces,
                                      std::vector<double> thresholds, double sigma);
};

using ModelVariant =
    std::variant<Tou, SimpleThreshold, SimpleSwitching, MultiThresholdOu, GeneralThreshold>;

struct ParamInterval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const noexcept { return hi - lo; }
  double mid() const noexcept { return 0.5 * (lo + hi); }
  bool contains(double x) const noexcept { return lo < x && x < hi; }
};

/// One open interval per unknown parameter.
struct ParamBox {
  std::vector<ParamInterval> intervals;

  ParamBox() = default;
  ParamBox(std::initializer_list<ParamInterval> list) : intervals(list) {}
  explicit ParamBox(std::vector<ParamInterval> list) : intervals(std::move(list)) {}

  std::size_t size() const noexcept { return intervals.size(); }
  const ParamInterval& operator[](std::size_t j) const { return intervals.at(j); }

  /// lo < hi for every interval.
  void validate() const;
  /// Additionally hi_j < lo_{j+1}, as required for ordered thresholds.
  void validate_ordered() const;
  ParamBox translated(double shift) const;
};

class InvariantDensity;

class ModelSpec {
 public:
  ModelSpec(ModelVariant model);  // NOLINT(google-explicit-constructor)
  ModelSpec(Tou m) : ModelSpec(ModelVariant(std::move(m))) {}
  ModelSpec(SimpleThreshold m) : ModelSpec(ModelVariant(std::move(m))) {}
  ModelSpec(SimpleSwitching m) : ModelSpec(ModelVariant(std::move(m))) {}
  ModelSpec(MultiThresholdOu m) : ModelSpec(ModelVariant(std::move(m))) {}
  ModelSpec(GeneralThreshold m) : ModelSpec(ModelVariant(std::move(m))) {}

  ModelKind kind() const noexcept;
  const ModelVariant& variant() const noexcept { return model_; }
  std::string describe() const;

  std::size_t num_thresholds() const noexcept;
  std::size_t num_regimes() const noexcept { return num_thresholds() + 1; }
  std::vector<double> thresholds() const;
  /// Same model with the thresholds replaced (fresh density cache).
  ModelSpec with_thresholds(std::span<const double> thresholds) const;
  BandConvention convention() const noexcept;

  std::size_t regime(double x) const noexcept;
  /// Trend of regime j evaluated at any x, regardless of which band x lies in.
  double regime_trend(std::size_t j, double x) const;
  double trend(double x) const { return regime_trend(regime(x), x); }
  double sigma(double x) const;
  std::optional<double> constant_sigma() const;
  /// Smallest mean-reversion rate, when the model has rates.
  std::optional<double> min_rate() const;

  /// Structural invariants (positive rates and noise, ordered thresholds).
  /// Throws InvalidModel / InvalidThresholdOrder.
  void validate() const;
  /// Loose check used by the simulator: finite parameters, sigma >= 0.
  void validate_simulable() const;
  /// Threshold identifiability: a jump in the trend at every threshold.
  bool identifiable() const;
  /// Drift sign conditions at +-infinity. Throws NonErgodicModel.
  void check_ergodic() const;

  /// Stationary law, computed once per model value and shared by copies.
  const InvariantDensity& density() const;

 private:
  struct Cache;
  ModelVariant model_;
  std::shared_ptr<Cache> cache_;
};

double trend_eval(const ModelSpec& model, double x);
double invariant_density(const ModelSpec& model, double x);

enum class GammaVariant {
  General,     ///< (S_{j+1} - S_j)^2 / sigma^2 * f(theta_j+) at theta_j
  PrintedTou,  ///< TOU only: the general value times exp(-rho1^2 theta^2 / sigma^2)
};

/// Scale converting the universal limit laws into threshold-j error laws.
double gamma_sq(const ModelSpec& model, std::size_t j, GammaVariant variant = GammaVariant::General);

}  // namespace tdiff
