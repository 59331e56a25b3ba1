#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tdiff/density.hpp"
#include "tdiff/estimators.hpp"
#include "tdiff/limit_laws.hpp"
#include "tdiff/model.hpp"
#include "tdiff/path.hpp"

namespace tdiff {

enum class Statistic { W2, D, V2 };

std::string_view to_string(Statistic stat) noexcept;
std::optional<Statistic> statistic_from_string(std::string_view name) noexcept;
/// Limit law of each statistic under the null hypothesis.
Functional null_law(Statistic stat) noexcept;

/// M_0 = 0, M_{i+1} = M_i + (dX_i - S(X_i) dt) / sigma(X_i): the driving
/// Brownian motion recovered under the hypothesised model.
std::vector<double> inner_process(PathView path, const ModelSpec& model0);

/// sum_{i<n} M_i^2 dt / T^2.
double w2_statistic(PathView path, const ModelSpec& model0);
/// max_i |M_i| / sqrt(T).
double d_statistic(PathView path, const ModelSpec& model0);

struct InnerStatistics {
  double w2 = 0.0;
  double d = 0.0;
};
/// Both statistics from one pass over the same inner process.
InnerStatistics inner_statistics(PathView path, const ModelSpec& model0);

/// Psi(x) = int_{-inf}^x F^2 / (sigma^2 f) dy + (F(x) / (1 - F(x)))^2 J(x),
/// J(x) = int_x^inf (1 - F)^2 / (sigma^2 f) dy, tabulated on a refinement of
/// the density nodes. The derivative is exact: the first and last terms of
/// the Leibniz expansion cancel, leaving Psi'(x) = 2 F f J / (1 - F)^3.
class PsiTable {
 public:
  static constexpr std::size_t kRefine = 8;

  explicit PsiTable(const ModelSpec& model0);

  double operator()(double x) const;
  double derivative(double x) const;
  double lower_integral(double x) const;
  double upper_integral(double x) const;

  const ModelSpec& model() const noexcept { return model_; }
  const InvariantDensity& density() const noexcept { return model_.density(); }
  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& psi_on_grid() const noexcept { return psi_; }
  const std::vector<double>& derivative_on_grid() const noexcept { return dpsi_; }

 private:
  double low_integrand(double y) const;
  double high_integrand(double y) const;
  std::size_t cell_of(double x) const;

  ModelSpec model_;
  std::vector<double> grid_;
  std::vector<double> cum_low_;
  std::vector<double> cum_high_;
  std::vector<double> psi_;
  std::vector<double> dpsi_;
};

double psi_function(const ModelSpec& model0, double x);

using PsiWeight = std::function<double(double)>;
/// M(s) = e^{-s}.
PsiWeight exp_weight();

/// T int Psi'(x) M(Psi(x)) ((Fhat(x) - F(x)) / (1 - F(x)))^2 dx, which is
/// T int H (Fhat - F)^2 dF with H = Psi' M(Psi) / (f (F - 1)^2). Trapezoid
/// over the table grid with the empirical CDF counted per grid cell.
double v2_weighted(PathView path, const PsiTable& psi, const PsiWeight& weight = exp_weight());
double v2_weighted(PathView path, const ModelSpec& model0, const PsiWeight& weight = exp_weight());
/// Same integral with an arbitrary estimate of F in place of the path.
double v2_weighted_from_cdf(const std::function<double(double)>& fhat, double duration, const PsiTable& psi,
                            const PsiWeight& weight = exp_weight());

struct GofReport {
  Statistic statistic = Statistic::W2;
  double value = 0.0;
  double threshold = 0.0;
  double alpha = 0.05;
  bool reject = false;
  bool composite = false;
  std::vector<double> plug_in;
  std::string table;
};

double compute_statistic(Statistic stat, PathView path, const ModelSpec& model0);

GofReport simple_test(PathView path, const ModelSpec& model0, Statistic stat, double alpha,
                      const QuantileTable& table);

/// Composite-hypothesis test at supplied threshold values.
GofReport plug_in_test(PathView path, const ModelSpec& family, std::span<const double> thresholds, double alpha,
                       Statistic stat, const QuantileTable& table);

/// Plug-in test: thresholds estimated on the same path (MLE by default,
/// posterior mean with Method::Bayes), decision against the simple-hypothesis
/// table.
GofReport composite_test(PathView path, const ModelSpec& family, const ParamBox& box, double alpha,
                         Statistic stat, const QuantileTable& table, Method plug_in = Method::Mle);

}  // namespace tdiff
