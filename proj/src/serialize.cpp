#include "tdiff/serialize.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <variant>

#include "tdiff/error.hpp"

namespace tdiff {

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  fail(ErrorKind::ConfigError, where + ": " + what);
}

std::vector<double> number_list(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) config_error(where + "." + key, "missing");
  const auto& v = j.at(key);
  if (!v.is_array()) config_error(where + "." + key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) config_error(where + "." + key + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

}  // namespace

double require_number(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) config_error(where, "expected an object");
  if (!j.contains(key)) config_error(where + "." + key, "missing");
  if (!j.at(key).is_number()) config_error(where + "." + key, "expected a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) config_error(where + "." + key, "must be finite");
  return v;
}

double number_or(const Json& j, const std::string& key, double fallback, const std::string& where) {
  return j.contains(key) ? require_number(j, key, where) : fallback;
}

InitRule init_from_json(const Json& j, const std::string& where) {
  auto norm = [](std::string k) {
    std::string out;
    for (char c : k) {
      if (c != '-' && c != '_') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
  };
  if (j.is_string()) {
    if (norm(j.get<std::string>()) == "stationary") return InitRule::stationary();
    config_error(where, "string form only supports \"stationary\"");
  }
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) config_error(where + ".kind", "missing");
  const auto k = norm(j.at("kind").get<std::string>());
  if (k == "stationary") return InitRule::stationary();
  if (k == "fixed") return InitRule::fixed(require_number(j, "x0", where));
  if (k == "burnin") {
    return InitRule::burn_in(number_or(j, "x0", 0.0, where),
                             number_or(j, "duration", std::numeric_limits<double>::quiet_NaN(), where));
  }
  config_error(where + ".kind", "unknown init kind");
}

Json model_to_json(const ModelSpec& model) {
  return std::visit(
      [&](const auto& m) -> Json {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Tou>) {
          return {{"kind", "TOU"}, {"rho1", m.rho1}, {"rho2", m.rho2}, {"sigma", m.sigma}, {"theta", m.theta}};
        } else if constexpr (std::is_same_v<M, SimpleThreshold>) {
          return {{"kind", "SimpleThreshold"}, {"rho1", m.rho1}, {"rho2", m.rho2}, {"sigma", m.sigma}, {"theta", m.theta}};
        } else if constexpr (std::is_same_v<M, SimpleSwitching>) {
          return {{"kind", "SimpleSwitching"}, {"rho", m.rho}, {"sigma", m.sigma}, {"theta", m.theta}};
        } else if constexpr (std::is_same_v<M, MultiThresholdOu>) {
          return {{"kind", "MultiThresholdOU"}, {"rates", m.rates}, {"thresholds", m.thresholds}, {"sigma", m.sigma}};
        } else {
          if (m.affine.size() != m.trends.size() || !m.constant_sigma) {
            fail(ErrorKind::ConfigError, "general model built from callables cannot be serialized");
          }
          Json trends = Json::array();
          for (const auto& p : m.affine) trends.push_back({{"intercept", p.intercept}, {"slope", p.slope}});
          return {{"kind", "GeneralThreshold"},
                  {"trends", trends},
                  {"sigma", *m.constant_sigma},
                  {"thresholds", m.thresholds}};
        }
      },
      model.variant());
}

ModelSpec model_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) config_error(where, "expected an object");
  if (!j.contains("kind") || !j.at("kind").is_string()) config_error(where + ".kind", "missing model kind");
  const auto kind = j.at("kind").get<std::string>();
  std::optional<ModelSpec> model;
  if (kind == "TOU") {
    model = ModelSpec(Tou{require_number(j, "rho1", where), require_number(j, "rho2", where),
                          require_number(j, "sigma", where), require_number(j, "theta", where)});
  } else if (kind == "SimpleThreshold") {
    model = ModelSpec(SimpleThreshold{require_number(j, "rho1", where), require_number(j, "rho2", where),
                                      require_number(j, "sigma", where), require_number(j, "theta", where)});
  } else if (kind == "SimpleSwitching") {
    model = ModelSpec(SimpleSwitching{require_number(j, "rho", where), require_number(j, "sigma", where),
                                      require_number(j, "theta", where)});
  } else if (kind == "MultiThresholdOU") {
    model = ModelSpec(MultiThresholdOu{number_list(j, "rates", where), number_list(j, "thresholds", where),
                                       require_number(j, "sigma", where)});
  } else if (kind == "GeneralThreshold") {
    if (!j.contains("trends") || !j.at("trends").is_array()) config_error(where + ".trends", "expected an array");
    std::vector<AffineTrend> pieces;
    const auto& t = j.at("trends");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string w = where + ".trends[" + std::to_string(i) + "]";
      pieces.push_back({number_or(t[i], "intercept", 0.0, w), number_or(t[i], "slope", 0.0, w)});
    }
    model = ModelSpec(GeneralThreshold::from_affine(std::move(pieces), number_list(j, "thresholds", where),
                                                    require_number(j, "sigma", where)));
  } else {
    config_error(where + ".kind", "unknown model kind '" + kind + "'");
  }
  try {
    model->validate();
  } catch (const Error& e) {
    config_error(where, e.what());
  }
  return *model;
}

Json box_to_json(const ParamBox& box) {
  Json out = Json::array();
  for (const auto& iv : box.intervals) out.push_back({iv.lo, iv.hi});
  return out;
}

ParamBox box_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) config_error(where, "expected [[lo, hi], ...]");
  ParamBox box;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& iv = j[i];
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number()) {
      config_error(w, "expected [lo, hi]");
    }
    const double lo = iv[0].get<double>(), hi = iv[1].get<double>();
    if (!(lo < hi)) config_error(w, "needs lo < hi");
    box.intervals.push_back({lo, hi});
  }
  return box;
}

Contamination contamination_from_json(const Json& j, const Tou& base, const std::string& where) {
  if (j.is_null()) return Contamination::none();
  if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) {
    config_error(where + ".family", "missing contamination family");
  }
  const auto family = j.at("family").get<std::string>();
  if (family == "none") return Contamination::none();
  if (family == "linear") {
    return Contamination::linear(require_number(j, "slope", where), require_number(j, "lo", where),
                                 require_number(j, "hi", where));
  }
  if (family == "scaled-threshold") {
    return Contamination::scaled_threshold(require_number(j, "factor", where), base.rho1, base.rho2,
                                           require_number(j, "lo", where), require_number(j, "hi", where));
  }
  if (family == "tabulated") {
    if (j.contains("file")) {
      if (!j.at("file").is_string()) config_error(where + ".file", "expected a path");
      return Contamination::from_csv(j.at("file").get<std::string>());
    }
    return Contamination::tabulated(number_list(j, "x", where), number_list(j, "h", where));
  }
  config_error(where + ".family", "unknown family '" + family + "'");
}

Json estimate_to_json(const ThresholdEstimate& est) {
  Json comps = Json::array();
  for (const auto& c : est.components) {
    Json jc = {{"name", c.name},
               {"value", c.value},
               {"rate_exponent", c.rate_exponent},
               {"argmax_interval", {c.argmax_interval.lo, c.argmax_interval.hi}},
               {"curve_max", c.curve_max},
               {"breakpoints", c.breakpoints},
               {"flat", c.flat}};
    if (est.method == Method::Bayes) jc["log_evidence"] = c.log_evidence;
    if (c.truth) jc["truth"] = *c.truth;
    if (c.normalized_error) jc["normalized_error"] = *c.normalized_error;
    comps.push_back(jc);
  }
  Json out = {{"method", std::string(to_string(est.method))},
              {"point", est.point()},
              {"components", comps},
              {"duration", est.duration},
              {"flat", est.flat()},
              {"seed", est.seed},
              {"stream", est.stream},
              {"model", est.model}};
  if (est.method == Method::Windowed) out["window_miss"] = est.window_miss;
  if (!est.diagnostics.empty()) out["diagnostics"] = est.diagnostics;
  return out;
}

Json gof_report_to_json(const GofReport& r) {
  Json out = {{"statistic", std::string(to_string(r.statistic))},
              {"value", r.value},
              {"threshold", r.threshold},
              {"alpha", r.alpha},
              {"reject", r.reject},
              {"hypothesis", r.composite ? "composite" : "simple"},
              {"table", r.table}};
  if (r.composite) out["plug_in"] = r.plug_in;
  return out;
}

}  // namespace tdiff
