#include "tdiff/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tdiff/error.hpp"
#include "tdiff/quadrature.hpp"

namespace tdiff {

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::Mle: return "MLE";
    case Method::Bayes: return "Bayes";
    case Method::Profile: return "Profile";
    case Method::TwoStage: return "TwoStage";
    case Method::MoM: return "MoM";
    case Method::Windowed: return "Windowed";
  }
  return "Unknown";
}

std::vector<double> ThresholdEstimate::point() const {
  std::vector<double> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(c.value);
  return out;
}

bool ThresholdEstimate::flat() const {
  return std::any_of(components.begin(), components.end(), [](const auto& c) { return c.flat; });
}

void ThresholdEstimate::attach_truth(std::span<const double> truth) {
  if (truth.size() != components.size()) {
    fail(ErrorKind::InvalidArgument, "truth has the wrong number of components");
  }
  for (std::size_t j = 0; j < truth.size(); ++j) {
    auto& c = components[j];
    c.truth = truth[j];
    c.normalized_error = std::pow(duration, c.rate_exponent) * (c.value - truth[j]);
  }
  if (method == Method::Windowed) {
    const auto lo = diagnostics.find("window_lo");
    const auto hi = diagnostics.find("window_hi");
    if (lo != diagnostics.end() && hi != diagnostics.end()) {
      window_miss = !(truth[0] >= lo->second && truth[0] <= hi->second);
    }
  }
}

ComponentEstimate argmax_estimate(const LogLikCurve& curve, std::string name) {
  ComponentEstimate out;
  out.name = std::move(name);
  out.breakpoints = curve.breakpoints.size();
  out.flat = curve.flat();
  if (out.flat) {
    out.value = curve.box.mid();
    out.argmax_interval = curve.box;
    out.curve_max = curve.values.empty() ? 0.0 : curve.values.front();
    return out;
  }
  const std::size_t k = curve.argmax();
  out.argmax_interval = {curve.edge(k), curve.edge(k + 1)};
  out.value = curve.midpoint(k);
  out.curve_max = curve.values[k];
  return out;
}

ComponentEstimate posterior_mean_estimate(const LogLikCurve& curve, const Prior& prior, std::string name) {
  ComponentEstimate out;
  out.name = std::move(name);
  out.breakpoints = curve.breakpoints.size();
  out.flat = curve.flat();
  const double top = curve.values.empty() ? 0.0 : curve.max_value();
  out.curve_max = top;

  double mass = 0.0;
  double moment = 0.0;
  double prior_total = 0.0;
  for (std::size_t k = 0; k < curve.intervals(); ++k) {
    const double a = curve.edge(k);
    const double b = curve.edge(k + 1);
    const double w = std::exp(curve.values[k] - top);
    double m = 0.0;
    double mm = 0.0;
    if (prior.is_uniform()) {
      m = b - a;
      mm = (b - a) * 0.5 * (a + b);
    } else {
      m = quad::gauss15(prior.density, a, b);
      mm = quad::gauss15([&](double t) { return t * prior.density(t); }, a, b);
    }
    prior_total += m;
    mass += w * m;
    moment += w * mm;
  }
  if (!(mass > 0.0) || !(prior_total > 0.0)) {
    fail(ErrorKind::InvalidArgument, "prior has no mass on the box");
  }
  out.value = moment / mass;
  out.log_evidence = top + std::log(mass / prior_total);
  out.argmax_interval = curve.box;
  return out;
}

namespace {

void check_box(const ModelSpec& model, const ParamBox& box) {
  if (box.size() != model.num_thresholds()) {
    std::ostringstream msg;
    msg << "box has " << box.size() << " intervals but the model has " << model.num_thresholds()
        << " thresholds";
    fail(ErrorKind::InvalidArgument, msg.str());
  }
  box.validate_ordered();
}

ComponentEstimate component(std::string name, double value, double rate_exponent) {
  ComponentEstimate c;
  c.name = std::move(name);
  c.value = value;
  c.rate_exponent = rate_exponent;
  return c;
}

std::string threshold_name(std::size_t j) { return "theta_" + std::to_string(j + 1); }

ThresholdEstimate scan(PathView path, const ModelSpec& model, const ParamBox& box, Method method,
                       std::span<const Prior> priors) {
  check_box(model, box);
  if (!priors.empty() && priors.size() != box.size()) {
    fail(ErrorKind::InvalidArgument, "need one prior per threshold");
  }
  ThresholdEstimate est;
  est.method = method;
  est.duration = path.duration();
  est.model = model.describe();
  for (std::size_t j = 0; j < box.size(); ++j) {
    const auto curve = loglik_curve(path, model, j, box[j]);
    if (method == Method::Mle) {
      est.components.push_back(argmax_estimate(curve, threshold_name(j)));
    } else {
      const Prior prior = priors.empty() ? Prior::uniform() : priors[j];
      est.components.push_back(posterior_mean_estimate(curve, prior, threshold_name(j)));
    }
  }
  return est;
}

// Sums of X dX and X^2 dt over samples in [lo, hi).
struct RegimeSums {
  double cross = 0.0;   // sum X dX
  double square = 0.0;  // sum X^2 dt
};

RegimeSums regime_sums(PathView path, double lo, double hi) {
  RegimeSums s;
  const std::size_t n = path.steps();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = path[i];
    if (x >= lo && x < hi) {
      s.cross += x * (path[i + 1] - x);
      s.square += x * x * path.dt;
    }
  }
  return s;
}

void check_rate_boxes(const ParamBox& boxes) {
  if (boxes.size() != 3) fail(ErrorKind::InvalidArgument, "need three boxes: rho1, rho2, theta");
  boxes.validate();
  if (!(boxes[0].hi < boxes[1].lo) || !(boxes[1].lo > 0.0)) {
    fail(ErrorKind::InvalidArgument, "rate boxes must satisfy hi(rho1) < lo(rho2) and lo(rho2) > 0");
  }
}

}  // namespace

ThresholdEstimate mle_threshold(PathView path, const ModelSpec& model, const ParamBox& box) {
  return scan(path, model, box, Method::Mle, {});
}

ThresholdEstimate bayes_threshold(PathView path, const ModelSpec& model, const ParamBox& box,
                                  std::span<const Prior> priors) {
  return scan(path, model, box, Method::Bayes, priors);
}

double regime_rate(PathView path, double lo, double hi) {
  const auto s = regime_sums(path, lo, hi);
  if (!(s.square > 0.0)) fail(ErrorKind::RegimeStarved, "no samples in the regime");
  return -s.cross / s.square;
}

ThresholdEstimate joint_estimate_tou3(PathView path, double sigma, const ParamBox& boxes) {
  check_rate_boxes(boxes);
  if (!(sigma > 0.0)) fail(ErrorKind::DegenerateSigma, "sigma must be positive");
  const double T = path.duration();
  const double floor = 1e-8 * T;
  const double s2 = sigma * sigma;
  const ParamInterval tb = boxes[2];
  const std::size_t n = path.steps();

  // Below-lo totals, in-box samples and grand totals.
  RegimeSums below;
  RegimeSums total;
  struct Sample {
    double x, cross, square;
  };
  std::vector<Sample> inside;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = path[i];
    const double c = x * (path[i + 1] - x);
    const double q = x * x * path.dt;
    total.cross += c;
    total.square += q;
    if (x <= tb.lo) {
      below.cross += c;
      below.square += q;
    } else if (x < tb.hi) {
      inside.push_back({x, c, q});
    }
  }
  std::sort(inside.begin(), inside.end(), [](const Sample& a, const Sample& b) { return a.x < b.x; });

  auto profile = [&](const RegimeSums& low, double& r1, double& r2) {
    const RegimeSums high{total.cross - low.cross, total.square - low.square};
    if (low.square < floor || high.square < floor) return -std::numeric_limits<double>::infinity();
    r1 = std::clamp(-low.cross / low.square, boxes[0].lo, boxes[0].hi);
    r2 = std::clamp(-high.cross / high.square, boxes[1].lo, boxes[1].hi);
    return (-r1 * low.cross - 0.5 * r1 * r1 * low.square - r2 * high.cross - 0.5 * r2 * r2 * high.square) / s2;
  };

  double best = -std::numeric_limits<double>::infinity();
  double best_r1 = 0.0, best_r2 = 0.0;
  ParamInterval best_iv{};
  std::size_t valid = 0;
  RegimeSums running = below;
  double left = tb.lo;
  std::size_t i = 0;
  std::size_t intervals = 0;
  while (true) {
    const double right = i < inside.size() ? inside[i].x : tb.hi;
    double r1 = 0.0, r2 = 0.0;
    const double value = profile(running, r1, r2);
    ++intervals;
    if (std::isfinite(value)) {
      ++valid;
      if (value > best) {
        best = value;
        best_r1 = r1;
        best_r2 = r2;
        best_iv = {left, right};
      }
    }
    if (i >= inside.size()) break;
    for (; i < inside.size() && inside[i].x == right; ++i) {
      running.cross += inside[i].cross;
      running.square += inside[i].square;
    }
    left = right;
  }
  if (valid == 0) {
    fail(ErrorKind::RegimeStarved, "every threshold candidate leaves a regime with sum X^2 dt below 1e-8 T");
  }

  ThresholdEstimate est;
  est.method = Method::Profile;
  est.duration = T;
  est.model = "TOU";
  auto c1 = component("rho_1", best_r1, 0.5);
  auto c2 = component("rho_2", best_r2, 0.5);
  auto c3 = component("theta", best_iv.mid(), 1.0);
  c3.argmax_interval = best_iv;
  c3.curve_max = best;
  c3.breakpoints = intervals - 1;
  est.components = {c1, c2, c3};
  return est;
}

ThresholdEstimate two_stage_estimate(PathView path, double sigma, const ParamBox& boxes,
                                     TwoStageOptions options) {
  check_rate_boxes(boxes);
  if (!(sigma > 0.0)) fail(ErrorKind::DegenerateSigma, "sigma must be positive");
  const double T = path.duration();
  if (std::sqrt(T) < options.min_sqrt_duration) {
    std::ostringstream msg;
    msg << "two-stage estimation needs sqrt(T) >= " << options.min_sqrt_duration << ", got T = " << T;
    fail(ErrorKind::InvalidArgument, msg.str());
  }
  const std::size_t n = path.steps();
  const std::size_t n1 = std::min(sqrt_horizon_steps(T, path.dt), n - 1);
  const PathView early = path.slice(0, n1);
  const PathView late = path.slice(n1, n);
  const ParamInterval tb = boxes[2];

  // Stage 1: misspecified scan with box-midpoint rates.
  const ModelSpec pilot(Tou{boxes[0].mid(), boxes[1].mid(), sigma, tb.mid()});
  const auto stage1 = argmax_estimate(loglik_curve(early, pilot, 0, tb));

  // Stage 2: closed-form rates on the remaining path.
  const double inf = std::numeric_limits<double>::infinity();
  const auto low = regime_sums(late, -inf, stage1.value);
  const auto high = regime_sums(late, stage1.value, inf);
  const double floor = 1e-8 * T;
  if (low.square < floor || high.square < floor) {
    fail(ErrorKind::RegimeStarved, "stage-2 regime has sum X^2 dt below 1e-8 T");
  }
  const double r1 = -low.cross / low.square;
  const double r2 = -high.cross / high.square;

  // Stage 3: threshold scan with the stage-2 rates.
  const ModelSpec fitted(Tou{r1, r2, sigma, tb.mid()});
  auto stage3 = argmax_estimate(loglik_curve(late, fitted, 0, tb));
  stage3.rate_exponent = 1.0;

  ThresholdEstimate est;
  est.method = Method::TwoStage;
  est.duration = T;
  est.model = "TOU";
  auto c1 = component("rho_1", r1, 0.5);
  auto c2 = component("rho_2", r2, 0.5);
  est.components = {c1, c2, stage3};
  const double late_T = late.duration();
  est.diagnostics["stage1_theta"] = stage1.value;
  est.diagnostics["stage1_flat"] = stage1.flat ? 1.0 : 0.0;
  est.diagnostics["stage_split_time"] = early.duration();
  est.diagnostics["lln_below"] = low.square / late_T;
  est.diagnostics["lln_above"] = high.square / late_T;
  return est;
}

ThresholdEstimate mom_switching(PathView path) {
  const std::size_t n = path.steps();
  if (n == 0) fail(ErrorKind::InvalidArgument, "moment estimator needs at least one step");
  const std::size_t n1 = std::clamp<std::size_t>(sqrt_horizon_steps(path.duration(), path.dt), 1, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n1; ++i) sum += path[i];
  ThresholdEstimate est;
  est.method = Method::MoM;
  est.duration = path.duration();
  est.model = "SimpleSwitching";
  est.components.push_back(component("theta", sum / static_cast<double>(n1), 0.25));
  return est;
}

ThresholdEstimate windowed_mle_switching(PathView path, double rho, double sigma,
                                         std::optional<ParamInterval> window) {
  const double T = path.duration();
  const std::size_t n = path.steps();
  const std::size_t n1 = std::min(sqrt_horizon_steps(T, path.dt), n - 1);
  const double pilot = mom_switching(path).components.front().value;
  const double half = std::pow(T, -0.125);
  const ParamInterval box = window ? *window : ParamInterval{pilot - half, pilot + half};
  const ModelSpec model(SimpleSwitching{rho, sigma, box.mid()});
  const auto curve = loglik_curve(path.slice(n1, n), model, 0, box);

  ThresholdEstimate est;
  est.method = Method::Windowed;
  est.duration = T;
  est.model = model.describe();
  est.components.push_back(argmax_estimate(curve, "theta"));
  est.diagnostics["pilot"] = pilot;
  est.diagnostics["window_lo"] = box.lo;
  est.diagnostics["window_hi"] = box.hi;
  return est;
}

}  // namespace tdiff
