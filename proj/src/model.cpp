#include "tdiff/model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>

#include "tdiff/density.hpp"
#include "tdiff/error.hpp"

namespace tdiff {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool finite(double v) { return std::isfinite(v); }

void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

void require_increasing(const std::vector<double>& thresholds) {
  for (std::size_t j = 0; j < thresholds.size(); ++j) {
    require(finite(thresholds[j]), ErrorKind::InvalidModel, "threshold is not finite");
    if (j > 0 && !(thresholds[j - 1] < thresholds[j])) {
      fail(ErrorKind::InvalidThresholdOrder, "thresholds must be strictly increasing");
    }
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Tou: return "TOU";
    case ModelKind::SimpleThreshold: return "SimpleThreshold";
    case ModelKind::SimpleSwitching: return "SimpleSwitching";
    case ModelKind::MultiThresholdOu: return "MultiThresholdOU";
    case ModelKind::GeneralThreshold: return "GeneralThreshold";
  }
  return "Unknown";
}

GeneralThreshold GeneralThreshold::from_affine(std::vector<AffineTrend> pieces,
                                               std::vector<double> thresholds, double sigma) {
  GeneralThreshold g;
  for (const auto& p : pieces) {
    g.trends.push_back([p](double x) { return p.intercept + p.slope * x; });
  }
  g.sigma = [sigma](double) { return sigma; };
  g.thresholds = std::move(thresholds);
  g.label = "affine";
  g.affine = std::move(pieces);
  g.constant_sigma = sigma;
  return g;
}

void ParamBox::validate() const {
  for (const auto& iv : intervals) {
    if (!(iv.lo < iv.hi) || !finite(iv.lo) || !finite(iv.hi)) {
      std::ostringstream msg;
      msg << "parameter interval (" << iv.lo << ", " << iv.hi << ") is empty or not finite";
      fail(ErrorKind::InvalidArgument, msg.str());
    }
  }
}

void ParamBox::validate_ordered() const {
  validate();
  for (std::size_t j = 1; j < intervals.size(); ++j) {
    if (!(intervals[j - 1].hi < intervals[j].lo)) {
      fail(ErrorKind::InvalidThresholdOrder, "threshold boxes overlap: need hi_j < lo_{j+1}");
    }
  }
}

ParamBox ParamBox::translated(double shift) const {
  ParamBox out = *this;
  for (auto& iv : out.intervals) {
    iv.lo += shift;
    iv.hi += shift;
  }
  return out;
}

struct ModelSpec::Cache {
  std::once_flag once;
  std::unique_ptr<InvariantDensity> density;
  std::exception_ptr error;
};

ModelSpec::ModelSpec(ModelVariant model)
    : model_(std::move(model)), cache_(std::make_shared<Cache>()) {}

ModelKind ModelSpec::kind() const noexcept { return static_cast<ModelKind>(model_.index()); }

std::string ModelSpec::describe() const {
  std::ostringstream out;
  out << to_string(kind()) << "(";
  std::visit(overloaded{
                 [&](const Tou& m) {
                   out << "rho1=" << m.rho1 << ", rho2=" << m.rho2 << ", sigma=" << m.sigma
                       << ", theta=" << m.theta;
                 },
                 [&](const SimpleThreshold& m) {
                   out << "rho1=" << m.rho1 << ", rho2=" << m.rho2 << ", sigma=" << m.sigma
                       << ", theta=" << m.theta;
                 },
                 [&](const SimpleSwitching& m) {
                   out << "rho=" << m.rho << ", sigma=" << m.sigma << ", theta=" << m.theta;
                 },
                 [&](const MultiThresholdOu& m) {
                   out << "rates=[";
                   for (std::size_t i = 0; i < m.rates.size(); ++i) out << (i ? "," : "") << m.rates[i];
                   out << "], thresholds=[";
                   for (std::size_t i = 0; i < m.thresholds.size(); ++i)
                     out << (i ? "," : "") << m.thresholds[i];
                   out << "], sigma=" << m.sigma;
                 },
                 [&](const GeneralThreshold& m) {
                   out << m.label << ", thresholds=[";
                   for (std::size_t i = 0; i < m.thresholds.size(); ++i)
                     out << (i ? "," : "") << m.thresholds[i];
                   out << "]";
                 },
             },
             model_);
  out << ")";
  return out.str();
}

std::size_t ModelSpec::num_thresholds() const noexcept {
  return std::visit(overloaded{
                        [](const MultiThresholdOu& m) { return m.thresholds.size(); },
                        [](const GeneralThreshold& m) { return m.thresholds.size(); },
                        [](const auto&) { return std::size_t{1}; },
                    },
                    model_);
}

std::vector<double> ModelSpec::thresholds() const {
  return std::visit(overloaded{
                        [](const MultiThresholdOu& m) { return m.thresholds; },
                        [](const GeneralThreshold& m) { return m.thresholds; },
                        [](const auto& m) { return std::vector<double>{m.theta}; },
                    },
                    model_);
}

ModelSpec ModelSpec::with_thresholds(std::span<const double> thresholds) const {
  if (thresholds.size() != num_thresholds()) {
    fail(ErrorKind::IndexOutOfRange, "wrong number of thresholds for " + describe());
  }
  ModelVariant copy = model_;
  std::visit(overloaded{
                 [&](MultiThresholdOu& m) { m.thresholds.assign(thresholds.begin(), thresholds.end()); },
                 [&](GeneralThreshold& m) { m.thresholds.assign(thresholds.begin(), thresholds.end()); },
                 [&](auto& m) { m.theta = thresholds[0]; },
             },
             copy);
  return ModelSpec(std::move(copy));
}

BandConvention ModelSpec::convention() const noexcept {
  switch (kind()) {
    case ModelKind::MultiThresholdOu:
    case ModelKind::GeneralThreshold:
      return BandConvention::UpperClosed;
    default:
      return BandConvention::LowerOpen;
  }
}

std::size_t ModelSpec::regime(double x) const noexcept {
  return std::visit(overloaded{
                        [x](const MultiThresholdOu& m) {
                          return static_cast<std::size_t>(
                              std::lower_bound(m.thresholds.begin(), m.thresholds.end(), x) -
                              m.thresholds.begin());
                        },
                        [x](const GeneralThreshold& m) {
                          return static_cast<std::size_t>(
                              std::lower_bound(m.thresholds.begin(), m.thresholds.end(), x) -
                              m.thresholds.begin());
                        },
                        [x](const auto& m) { return x < m.theta ? std::size_t{0} : std::size_t{1}; },
                    },
                    model_);
}

double ModelSpec::regime_trend(std::size_t j, double x) const {
  if (j >= num_regimes()) fail(ErrorKind::IndexOutOfRange, "regime index out of range");
  return std::visit(overloaded{
                        [&](const Tou& m) { return j == 0 ? -m.rho1 * x : -m.rho2 * x; },
                        [&](const SimpleThreshold& m) { return j == 0 ? m.rho1 : -m.rho2; },
                        [&](const SimpleSwitching& m) { return j == 0 ? m.rho : -m.rho; },
                        [&](const MultiThresholdOu& m) { return -m.rates[j] * x; },
                        [&](const GeneralThreshold& m) { return m.trends[j](x); },
                    },
                    model_);
}

double ModelSpec::sigma(double x) const {
  return std::visit(overloaded{
                        [&](const GeneralThreshold& m) { return m.sigma(x); },
                        [](const auto& m) { return m.sigma; },
                    },
                    model_);
}

std::optional<double> ModelSpec::constant_sigma() const {
  return std::visit(overloaded{
                        [](const GeneralThreshold& m) { return m.constant_sigma; },
                        [](const auto& m) { return std::optional<double>(m.sigma); },
                    },
                    model_);
}

std::optional<double> ModelSpec::min_rate() const {
  return std::visit(overloaded{
                        [](const Tou& m) { return std::optional<double>(std::min(m.rho1, m.rho2)); },
                        [](const SimpleThreshold& m) {
                          return std::optional<double>(std::min(m.rho1, m.rho2));
                        },
                        [](const SimpleSwitching& m) { return std::optional<double>(m.rho); },
                        [](const MultiThresholdOu& m) {
                          double r = std::abs(m.rates.front());
                          for (double v : m.rates) r = std::min(r, std::abs(v));
                          return std::optional<double>(r);
                        },
                        [](const GeneralThreshold&) { return std::optional<double>(); },
                    },
                    model_);
}

void ModelSpec::validate_simulable() const {
  std::visit(overloaded{
                 [](const Tou& m) {
                   require(finite(m.rho1) && finite(m.rho2) && finite(m.theta), ErrorKind::InvalidModel,
                           "TOU parameters must be finite");
                   require(finite(m.sigma) && m.sigma >= 0, ErrorKind::InvalidModel, "sigma must be >= 0");
                 },
                 [](const SimpleThreshold& m) {
                   require(finite(m.rho1) && finite(m.rho2) && finite(m.theta), ErrorKind::InvalidModel,
                           "SimpleThreshold parameters must be finite");
                   require(finite(m.sigma) && m.sigma >= 0, ErrorKind::InvalidModel, "sigma must be >= 0");
                 },
                 [](const SimpleSwitching& m) {
                   require(finite(m.rho) && finite(m.theta), ErrorKind::InvalidModel,
                           "SimpleSwitching parameters must be finite");
                   require(finite(m.sigma) && m.sigma >= 0, ErrorKind::InvalidModel, "sigma must be >= 0");
                 },
                 [](const MultiThresholdOu& m) {
                   require(m.rates.size() == m.thresholds.size() + 1, ErrorKind::InvalidModel,
                           "MultiThresholdOU needs one more rate than thresholds");
                   for (double r : m.rates) require(finite(r), ErrorKind::InvalidModel, "rate not finite");
                   require_increasing(m.thresholds);
                   require(finite(m.sigma) && m.sigma >= 0, ErrorKind::InvalidModel, "sigma must be >= 0");
                 },
                 [](const GeneralThreshold& m) {
                   require(m.trends.size() == m.thresholds.size() + 1, ErrorKind::InvalidModel,
                           "GeneralThreshold needs one more trend than thresholds");
                   for (const auto& s : m.trends)
                     require(static_cast<bool>(s), ErrorKind::InvalidModel, "empty trend function");
                   require(static_cast<bool>(m.sigma), ErrorKind::InvalidModel, "empty sigma function");
                   require_increasing(m.thresholds);
                 },
             },
             model_);
}

void ModelSpec::validate() const {
  validate_simulable();
  std::visit(overloaded{
                 [](const Tou& m) {
                   require(m.rho1 > 0 && m.rho2 > 0, ErrorKind::InvalidModel, "TOU rates must be positive");
                   require(m.sigma > 0, ErrorKind::InvalidModel, "sigma must be positive");
                 },
                 [](const SimpleThreshold& m) {
                   require(m.rho1 > 0 && m.rho2 > 0, ErrorKind::InvalidModel,
                           "SimpleThreshold drifts must be positive");
                   require(m.sigma > 0, ErrorKind::InvalidModel, "sigma must be positive");
                 },
                 [](const SimpleSwitching& m) {
                   require(m.rho > 0, ErrorKind::InvalidModel, "SimpleSwitching rho must be positive");
                   require(m.sigma > 0, ErrorKind::InvalidModel, "sigma must be positive");
                 },
                 [](const MultiThresholdOu& m) {
                   require(!m.thresholds.empty(), ErrorKind::InvalidModel,
                           "MultiThresholdOU needs at least one threshold");
                   require(m.rates.front() > 0 && m.rates.back() > 0, ErrorKind::InvalidModel,
                           "outer rates of MultiThresholdOU must be positive");
                   require(m.sigma > 0, ErrorKind::InvalidModel, "sigma must be positive");
                 },
                 [](const GeneralThreshold& m) {
                   for (double t : m.thresholds) {
                     require(m.sigma(t) > 0, ErrorKind::InvalidModel, "sigma(x) must be positive");
                   }
                 },
             },
             model_);
}

bool ModelSpec::identifiable() const {
  return std::visit(overloaded{
                        [](const Tou& m) { return m.rho1 != m.rho2 && m.theta != 0.0; },
                        [](const MultiThresholdOu& m) {
                          for (std::size_t j = 0; j < m.thresholds.size(); ++j) {
                            if (m.rates[j] == m.rates[j + 1] || m.thresholds[j] == 0.0) return false;
                          }
                          return true;
                        },
                        [](const GeneralThreshold& m) {
                          for (std::size_t j = 0; j < m.thresholds.size(); ++j) {
                            const double t = m.thresholds[j];
                            if (m.trends[j](t) == m.trends[j + 1](t)) return false;
                          }
                          return true;
                        },
                        [](const auto&) { return true; },
                    },
                    model_);
}

void ModelSpec::check_ergodic() const {
  validate();
  // Probe S/sigma^2 far out on both sides: it must point back inwards.
  const auto th = thresholds();
  const double left = th.empty() ? 0.0 : th.front();
  const double right = th.empty() ? 0.0 : th.back();
  const std::size_t last = num_regimes() - 1;
  for (double d = 10.0; d <= 1e6; d *= 10.0) {
    const double xl = left - d;
    const double xr = right + d;
    const double sl = sigma(xl);
    const double sr = sigma(xr);
    const double ratio_l = regime_trend(0, xl) / (sl * sl);
    const double ratio_r = regime_trend(last, xr) / (sr * sr);
    if (!(ratio_l > 0.0) || !(ratio_r < 0.0)) {
      std::ostringstream msg;
      msg << describe() << ": drift does not point inwards at x = " << (ratio_l > 0.0 ? xr : xl);
      fail(ErrorKind::NonErgodicModel, msg.str());
    }
  }
}

const InvariantDensity& ModelSpec::density() const {
  std::call_once(cache_->once, [this] {
    try {
      cache_->density = std::make_unique<InvariantDensity>(*this);
    } catch (...) {
      cache_->error = std::current_exception();
    }
  });
  if (cache_->error) std::rethrow_exception(cache_->error);
  return *cache_->density;
}

double trend_eval(const ModelSpec& model, double x) { return model.trend(x); }

double invariant_density(const ModelSpec& model, double x) { return model.density().pdf(x); }

double gamma_sq(const ModelSpec& model, std::size_t j, GammaVariant variant) {
  if (j >= model.num_thresholds()) {
    fail(ErrorKind::IndexOutOfRange, "threshold index out of range for gamma_sq");
  }
  const double theta = model.thresholds()[j];
  const double jump = model.regime_trend(j + 1, theta) - model.regime_trend(j, theta);
  const double s = model.sigma(theta);
  double value = jump * jump / (s * s) * model.density().pdf_right(theta);
  if (variant == GammaVariant::PrintedTou) {
    const auto* tou = std::get_if<Tou>(&model.variant());
    if (tou == nullptr) fail(ErrorKind::InvalidArgument, "printed Gamma^2 variant exists only for TOU");
    value *= std::exp(-tou->rho1 * tou->rho1 * tou->theta * tou->theta / (tou->sigma * tou->sigma));
  }
  return value;
}

}  // namespace tdiff
