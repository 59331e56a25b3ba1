#include "tdiff/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tdiff/density.hpp"
#include "tdiff/error.hpp"
#include "tdiff/hash.hpp"
#include "tdiff/misspec.hpp"
#include "tdiff/parallel.hpp"

namespace tdiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  fail(ErrorKind::ConfigError, where + ": " + what);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string squash(std::string_view s) {
  std::string out;
  for (char c : lower(s)) {
    if (c != '-' && c != '_') out.push_back(c);
  }
  return out;
}

std::uint64_t require_count(const Json& j, const std::string& key, const std::string& where, std::uint64_t min) {
  const auto& v = j.at(key);
  const std::string w = where + "." + key;
  std::uint64_t out = 0;
  if (v.is_number_unsigned()) {
    out = v.get<std::uint64_t>();
  } else if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) config_error(w, "must be non-negative");
    out = static_cast<std::uint64_t>(v.get<std::int64_t>());
  } else if (v.is_number_float()) {
    const double d = v.get<double>();
    if (!(d >= 0.0) || d != std::floor(d) || d > 1.8e19) config_error(w, "expected a non-negative integer");
    out = static_cast<std::uint64_t>(d);
  } else {
    config_error(w, "expected an integer");
  }
  if (out < min) config_error(w, "must be at least " + std::to_string(min));
  return out;
}

std::vector<double> number_array(const Json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  const std::string w = where + "." + key;
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array() || v.empty()) config_error(w, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) config_error(w + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

std::vector<std::string> string_array(const Json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  const std::string w = where + "." + key;
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array() || v.empty()) config_error(w, "expected a non-empty array of names");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) config_error(w + "[" + std::to_string(i) + "]", "expected a name");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

std::optional<Method> method_from_string(std::string_view name) {
  for (auto m : {Method::Mle, Method::Bayes, Method::Profile, Method::TwoStage, Method::MoM, Method::Windowed}) {
    if (squash(to_string(m)) == squash(name)) return m;
  }
  return std::nullopt;
}

// Finite-value summaries; NaN entries (failed replicates) are skipped.
struct Moments {
  std::size_t n = 0;
  double mean = kNaN;
  double median = kNaN;
  double variance = kNaN;
  double second_moment = kNaN;
};

Moments moments(std::vector<double> xs) {
  xs.erase(std::remove_if(xs.begin(), xs.end(), [](double x) { return !std::isfinite(x); }), xs.end());
  Moments m;
  m.n = xs.size();
  if (xs.empty()) return m;
  double s = 0.0, s2 = 0.0;
  for (double x : xs) {
    s += x;
    s2 += x * x;
  }
  const double n = static_cast<double>(xs.size());
  m.mean = s / n;
  m.second_moment = s2 / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.variance = xs.size() > 1 ? ss / (n - 1.0) : 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t h = xs.size() / 2;
  m.median = xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
  return m;
}

Json moments_json(const Moments& m) {
  return {{"n", m.n}, {"mean", m.mean}, {"median", m.median}, {"variance", m.variance},
          {"second_moment", m.second_moment}};
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  double sa = 0.0, sb = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isfinite(a[i]) && std::isfinite(b[i])) {
      sa += a[i];
      sb += b[i];
      ++n;
    }
  }
  if (n < 3) return kNaN;
  const double ma = sa / static_cast<double>(n), mb = sb / static_cast<double>(n);
  double cab = 0.0, caa = 0.0, cbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isfinite(a[i]) && std::isfinite(b[i])) {
      cab += (a[i] - ma) * (b[i] - mb);
      caa += (a[i] - ma) * (a[i] - ma);
      cbb += (b[i] - mb) * (b[i] - mb);
    }
  }
  return cab / std::sqrt(caa * cbb);
}

std::uint64_t stream_of(std::size_t t, std::size_t i, std::size_t replicates) {
  return static_cast<std::uint64_t>(t) * replicates + i;
}

// Runs `body` for every (duration, replicate) pair. Each call fills the
// records of its slot; a library error marks all of them with its kind.
template <class Body>
void replicate_loop(const ExperimentConfig& cfg, const std::vector<std::string>& labels, std::size_t width,
                    ExperimentReport& report, Body&& body) {
  const std::size_t R = cfg.replicates;
  const std::size_t total = cfg.durations.size() * R;
  std::vector<std::vector<ReplicateRecord>> slots(total);
  parallel_for(total, cfg.workers, [&](std::size_t s) {
    const std::size_t t = s / R, i = s % R;
    auto& recs = slots[s];
    for (const auto& label : labels) {
      recs.push_back({cfg.durations[t], i, stream_of(t, i, R), label, "ok", std::vector<double>(width, kNaN)});
    }
    try {
      body(t, i, recs);
    } catch (const Error& e) {
      for (auto& r : recs) {
        r.status = std::string(to_string(e.kind()));
        std::fill(r.values.begin(), r.values.end(), kNaN);
      }
    }
  });
  for (auto& recs : slots) {
    for (auto& r : recs) {
      ++report.attempted;
      if (r.status != "ok") ++report.failures;
      report.records.push_back(std::move(r));
    }
  }
}

// Column values of the finished records matching (duration, label).
std::vector<double> column(const ExperimentReport& report, double duration, const std::string& label,
                           std::size_t col) {
  std::vector<double> out;
  for (const auto& r : report.records) {
    if (r.duration == duration && r.label == label) out.push_back(r.status == "ok" ? r.values[col] : kNaN);
  }
  return out;
}

Path simulate_for(const ExperimentConfig& cfg, std::size_t t, std::size_t i) {
  const ModelSpec& gen = cfg.truth ? *cfg.truth : *cfg.model;
  return simulate_path(gen, cfg.durations[t], cfg.dt, RngStream{cfg.seed, stream_of(t, i, cfg.replicates)},
                       cfg.init);
}

// ---- threshold estimators -------------------------------------------------

ThresholdEstimate estimate_one(const ExperimentConfig& cfg, Method m, PathView path) {
  const ModelSpec& model = *cfg.model;
  switch (m) {
    case Method::Mle: return mle_threshold(path, model, cfg.box);
    case Method::Bayes: return bayes_threshold(path, model, cfg.box);
    case Method::MoM: return mom_switching(path);
    case Method::Windowed: {
      const auto& sw = std::get<SimpleSwitching>(model.variant());
      return windowed_mle_switching(path, sw.rho, sw.sigma);
    }
    default: fail(ErrorKind::ConfigError, "estimator not available for this experiment kind");
  }
}

void run_threshold(const ExperimentConfig& cfg, ExperimentReport& report) {
  const ModelSpec& model = *cfg.model;
  const auto truth = model.thresholds();
  const std::size_t k = truth.size();
  for (std::size_t j = 0; j < k; ++j) report.columns.push_back("estimate_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < k; ++j) report.columns.push_back("error_" + std::to_string(j + 1));
  report.columns.push_back("flat");
  report.columns.push_back("window_miss");
  std::vector<std::string> labels;
  for (auto m : cfg.estimators) labels.emplace_back(to_string(m));

  model.density();
  if (cfg.truth) cfg.truth->density();
  replicate_loop(cfg, labels, report.columns.size(), report, [&](std::size_t t, std::size_t i,
                                                                  std::vector<ReplicateRecord>& recs) {
    const auto path = simulate_for(cfg, t, i);
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      try {
        auto est = estimate_one(cfg, cfg.estimators[e], path);
        est.attach_truth(truth);
        auto& v = recs[e].values;
        for (std::size_t j = 0; j < est.components.size(); ++j) {
          v[j] = est.components[j].value;
          v[k + j] = *est.components[j].normalized_error;
        }
        v[2 * k] = est.flat() ? 1.0 : 0.0;
        v[2 * k + 1] = est.window_miss ? 1.0 : 0.0;
      } catch (const Error& err) {
        recs[e].status = std::string(to_string(err.kind()));
      }
    }
  });

  Json per_duration = Json::array();
  for (double T : cfg.durations) {
    Json row = {{"duration", T}};
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      const auto m = cfg.estimators[e];
      const std::string label(to_string(m));
      Json comps = Json::array();
      std::vector<std::vector<double>> errors;
      for (std::size_t j = 0; j < k; ++j) {
        errors.push_back(column(report, T, label, k + j));
        Json c = {{"component", j + 1}, {"truth", truth[j]}, {"normalized_error", moments_json(moments(errors[j]))}};
        if (m == Method::Mle || m == Method::Bayes) {
          const auto general = predicted_error_scale(model, j, GammaVariant::General);
          c["gamma_sq"] = gamma_sq(model, j, GammaVariant::General);
          c["predicted_variance"] = m == Method::Mle ? general.mle : general.bayes;
          if (model.kind() == ModelKind::Tou) {
            const auto printed = predicted_error_scale(model, j, GammaVariant::PrintedTou);
            c["gamma_sq_printed"] = gamma_sq(model, j, GammaVariant::PrintedTou);
            c["predicted_variance_printed"] = m == Method::Mle ? printed.mle : printed.bayes;
          }
          const auto mm = moments(errors[j]);
          c["variance_ratio"] = mm.variance / c["predicted_variance"].get<double>();
        }
        comps.push_back(c);
      }
      Json est = {{"components", comps}};
      if (k >= 2) {
        Json corr = Json::array();
        for (std::size_t a = 0; a < k; ++a) {
          for (std::size_t b = a + 1; b < k; ++b) {
            corr.push_back({{"pair", {a + 1, b + 1}}, {"correlation", correlation(errors[a], errors[b])}});
          }
        }
        est["cross_correlation"] = corr;
      }
      const auto flats = moments(column(report, T, label, 2 * k));
      est["flat_rate"] = flats.mean;
      if (m == Method::Windowed) est["window_miss_rate"] = moments(column(report, T, label, 2 * k + 1)).mean;
      row[label] = est;
    }
    per_duration.push_back(row);
  }
  report.summary["durations"] = per_duration;
}

// ---- joint TOU ------------------------------------------------------------

void run_tou3(const ExperimentConfig& cfg, ExperimentReport& report) {
  const auto& tou = std::get<Tou>(cfg.model->variant());
  const std::vector<double> truth{tou.rho1, tou.rho2, tou.theta};
  report.columns = {"rho_1", "rho_2", "theta", "error_rho_1", "error_rho_2", "error_theta", "stage1_theta"};
  std::vector<std::string> labels;
  for (auto m : cfg.estimators) labels.emplace_back(to_string(m));
  if (cfg.truth) cfg.truth->density();

  replicate_loop(cfg, labels, report.columns.size(), report, [&](std::size_t t, std::size_t i,
                                                                  std::vector<ReplicateRecord>& recs) {
    const auto path = simulate_for(cfg, t, i);
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      try {
        auto est = cfg.estimators[e] == Method::Profile ? joint_estimate_tou3(path, tou.sigma, cfg.box)
                                                        : two_stage_estimate(path, tou.sigma, cfg.box);
        est.attach_truth(truth);
        auto& v = recs[e].values;
        for (std::size_t j = 0; j < 3; ++j) {
          v[j] = est.components[j].value;
          v[3 + j] = *est.components[j].normalized_error;
        }
        if (auto it = est.diagnostics.find("stage1_theta"); it != est.diagnostics.end()) v[6] = it->second;
      } catch (const Error& err) {
        recs[e].status = std::string(to_string(err.kind()));
      }
    }
  });

  const auto& dens = cfg.model->density();
  const double s2 = tou.sigma * tou.sigma;
  const double below = dens.expect([](double x) { return x * x; }, -std::numeric_limits<double>::infinity(), tou.theta);
  const double above = dens.expect([](double x) { return x * x; }, tou.theta, std::numeric_limits<double>::infinity());
  const double pred1 = s2 / below, pred2 = s2 / above;
  const double pred_theta = predicted_error_scale(*cfg.model, 0).mle;

  Json per_duration = Json::array();
  for (double T : cfg.durations) {
    Json row = {{"duration", T}};
    for (auto m : cfg.estimators) {
      const std::string label(to_string(m));
      const auto e1 = column(report, T, label, 3), e2 = column(report, T, label, 4), e3 = column(report, T, label, 5);
      const auto m1 = moments(e1), m2 = moments(e2), m3 = moments(e3);
      row[label] = {
          {"rho_1", {{"normalized_error", moments_json(m1)}, {"predicted_variance", pred1},
                     {"variance_ratio", m1.variance / pred1}}},
          {"rho_2", {{"normalized_error", moments_json(m2)}, {"predicted_variance", pred2},
                     {"variance_ratio", m2.variance / pred2}}},
          {"theta", {{"normalized_error", moments_json(m3)}, {"predicted_variance", pred_theta},
                     {"variance_ratio", m3.variance / pred_theta}}},
          {"rate_error_correlation", correlation(e1, e2)}};
    }
    per_duration.push_back(row);
  }
  report.summary["durations"] = per_duration;
}

// ---- goodness of fit ------------------------------------------------------

void run_gof(const ExperimentConfig& cfg, ExperimentReport& report) {
  const ModelSpec& model0 = *cfg.model;
  report.columns = {"value", "alpha", "threshold", "reject", "plug_in"};
  std::vector<QuantileTable> tables;
  for (auto s : cfg.statistics) tables.push_back(read_quantile_table(cfg.tables_dir, null_law(s)));
  std::optional<PsiTable> psi;
  if (std::find(cfg.statistics.begin(), cfg.statistics.end(), Statistic::V2) != cfg.statistics.end()) {
    psi.emplace(model0);
  }
  if (cfg.truth) cfg.truth->density();
  model0.density();

  std::vector<std::string> labels;
  for (auto s : cfg.statistics) {
    for (const char* hyp : {"simple", "composite"}) {
      if (std::string(hyp) == "composite" && !cfg.composite) continue;
      for (double a : cfg.alphas) {
        std::ostringstream os;
        os << to_string(s) << '/' << hyp << '/' << a;
        labels.push_back(os.str());
      }
    }
  }
  const std::size_t per_stat = (cfg.composite ? 2 : 1) * cfg.alphas.size();

  replicate_loop(cfg, labels, report.columns.size(), report, [&](std::size_t t, std::size_t i,
                                                                  std::vector<ReplicateRecord>& recs) {
    const auto path = simulate_for(cfg, t, i);
    std::optional<InnerStatistics> inner;
    for (std::size_t s = 0; s < cfg.statistics.size(); ++s) {
      const auto stat = cfg.statistics[s];
      const auto& table = tables[s];
      const std::size_t base = s * per_stat;
      double value = 0.0;
      if (stat == Statistic::V2) {
        value = v2_weighted(path, *psi);
      } else {
        if (!inner) inner = inner_statistics(path, model0);
        value = stat == Statistic::W2 ? inner->w2 : inner->d;
      }
      for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
        const double c = table.threshold(cfg.alphas[a]);
        recs[base + a].values = {value, cfg.alphas[a], c, value > c ? 1.0 : 0.0, kNaN};
      }
      if (!cfg.composite) continue;
      const std::size_t cbase = base + cfg.alphas.size();
      try {
        const auto rep = composite_test(path, model0, cfg.box, cfg.alphas.front(), stat, table);
        for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
          const double c = table.threshold(cfg.alphas[a]);
          recs[cbase + a].values = {rep.value, cfg.alphas[a], c, rep.value > c ? 1.0 : 0.0,
                                    rep.plug_in.empty() ? kNaN : rep.plug_in.front()};
        }
      } catch (const Error& err) {
        for (std::size_t a = 0; a < cfg.alphas.size(); ++a) recs[cbase + a].status = std::string(to_string(err.kind()));
      }
    }
  });

  Json per_duration = Json::array();
  for (double T : cfg.durations) {
    Json row = {{"duration", T}};
    Json tests = Json::array();
    for (std::size_t l = 0; l < labels.size(); ++l) {
      const std::size_t s = l / per_stat;
      const auto rejects = moments(column(report, T, labels[l], 3));
      const auto values = column(report, T, labels[l], 0);
      const double alpha = cfg.alphas[(l % per_stat) % cfg.alphas.size()];
      const double n = static_cast<double>(rejects.n);
      const double se = n > 0 ? std::sqrt(alpha * (1.0 - alpha) / n) : kNaN;
      std::vector<double> finite;
      for (double v : values) {
        if (std::isfinite(v)) finite.push_back(v);
      }
      tests.push_back({{"test", labels[l]},
                       {"statistic", std::string(to_string(cfg.statistics[s]))},
                       {"alpha", alpha},
                       {"rejection_rate", rejects.mean},
                       {"binomial_se", se},
                       {"z", (rejects.mean - alpha) / se},
                       {"replicates", rejects.n},
                       {"ks_to_table", finite.empty() ? kNaN : ks_distance_to_table(finite, tables[s])},
                       {"table", std::string(to_string(tables[s].tag))}});
    }
    row["tests"] = tests;
    per_duration.push_back(row);
  }
  report.summary["durations"] = per_duration;
}

// ---- misspecification -----------------------------------------------------

void run_misspec(const ExperimentConfig& cfg, ExperimentReport& report) {
  const auto& base = std::get<Tou>(cfg.model->variant());
  const auto h = contamination_from_json(cfg.contamination, base);
  MisspecSettings settings{cfg.durations, cfg.dt, cfg.replicates, cfg.seed, cfg.workers};
  const auto result = misspec_experiment(base, h, cfg.box[0], settings);
  report.columns = {"estimate", "error"};
  Json rows = Json::array();
  for (std::size_t t = 0; t < result.rows.size(); ++t) {
    const auto& row = result.rows[t];
    for (std::size_t i = 0; i < row.estimates.size(); ++i) {
      const double e = row.estimates[i];
      const bool ok = std::isfinite(e);
      report.records.push_back({row.duration, i, stream_of(t, i, cfg.replicates), "MLE", ok ? "ok" : "Failed",
                                {e, ok ? row.duration * (e - base.theta) : kNaN}});
      ++report.attempted;
      if (!ok) ++report.failures;
    }
    rows.push_back({{"duration", row.duration},
                    {"replicates", row.replicates},
                    {"failures", row.failures},
                    {"median_estimate", row.median_estimate},
                    {"mean_estimate", row.mean_estimate},
                    {"median_bias", row.median_bias},
                    {"iqr", row.iqr}});
  }
  report.summary = {{"contamination", h.tag},
                    {"theta0", result.theta0},
                    {"kl_argmin", result.kl_argmin},
                    {"condition_checked", base.rho2 > base.rho1},
                    {"condition_holds", result.condition7.holds},
                    {"condition_margin", result.condition7.margin},
                    {"condition_worst_y", result.condition7.worst_y},
                    {"rows", rows}};
}

// ---- limit laws -----------------------------------------------------------

std::optional<double> reference_mean(Functional f) {
  switch (f) {
    case Functional::ArgmaxU:
    case Functional::BayesU: return 0.0;
    case Functional::IntW2_01: return 0.5;
    case Functional::SupAbsW_01: return std::sqrt(std::acos(-1.0) / 2.0);
    case Functional::IntW2Exp: return 1.0;
  }
  return std::nullopt;
}

std::optional<double> reference_second_moment(Functional f) {
  switch (f) {
    case Functional::ArgmaxU: return kArgmaxSecondMoment;
    case Functional::BayesU: return bayes_second_moment();
    case Functional::IntW2_01: return 7.0 / 12.0;  // variance 1/3 plus mean^2
    default: return std::nullopt;
  }
}

void run_limit_law(const ExperimentConfig& cfg, ExperimentReport& report) {
  report.columns = {"value"};
  std::vector<LimitLawSamples> batches;
  const bool want_field = std::any_of(cfg.functionals.begin(), cfg.functionals.end(), [](Functional f) {
    return f == Functional::ArgmaxU || f == Functional::BayesU;
  });
  std::optional<FieldSamples> field;
  if (want_field) field = sample_field_batch(cfg.draws, cfg.field_grid, cfg.seed, cfg.workers);
  for (auto f : cfg.functionals) {
    if (f == Functional::ArgmaxU) {
      batches.push_back(field->argmax);
    } else if (f == Functional::BayesU) {
      batches.push_back(field->posterior_mean);
    } else {
      batches.push_back(sample_functional_batch(f, cfg.draws, cfg.functional_grid, cfg.seed, cfg.workers));
    }
  }
  Json out = Json::array();
  for (const auto& b : batches) {
    const std::string label(to_string(b.tag));
    for (std::size_t i = 0; i < b.samples.size(); ++i) {
      report.records.push_back({0.0, i, i, label, "ok", {b.samples[i]}});
    }
    const double n = static_cast<double>(b.samples.size());
    Json s = {{"functional", label},
              {"draws", b.samples.size()},
              {"mean", b.mean()},
              {"mean_se", std::sqrt(b.variance() / n)},
              {"variance", b.variance()},
              {"second_moment", b.second_moment()},
              {"boundary_hits", b.boundary_hits},
              {"horizon", b.horizon},
              {"step", b.step}};
    if (auto m = reference_mean(b.tag)) s["reference_mean"] = *m;
    if (auto m = reference_second_moment(b.tag)) s["reference_second_moment"] = *m;
    out.push_back(s);
  }
  report.summary["functionals"] = out;
}

void run_tables(const ExperimentConfig& cfg, ExperimentReport& report) {
  report.columns = {"alpha", "threshold", "se"};
  const auto tables = build_tables(cfg);
  Json out = Json::array();
  for (const auto& t : tables) {
    const std::string label(to_string(t.tag));
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
      const auto& e = t.entries[i];
      report.records.push_back({0.0, i, 0, label, "ok", {e.alpha, e.threshold, e.se}});
    }
    out.push_back({{"functional", label},
                   {"file", table_file(cfg.tables_dir, t.tag)},
                   {"replicates", t.replicates},
                   {"entries", t.entries.size()},
                   {"mean", t.mean},
                   {"variance", t.variance}});
  }
  report.summary["tables"] = out;
}

void check_estimators(const ExperimentConfig& cfg, std::initializer_list<Method> allowed) {
  for (auto m : cfg.estimators) {
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end()) {
      config_error("estimators", std::string(to_string(m)) + " is not available for " + std::string(to_string(cfg.kind)));
    }
  }
}

}  // namespace

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::Threshold: return "threshold";
    case ExperimentKind::Tou3: return "tou3";
    case ExperimentKind::Gof: return "gof";
    case ExperimentKind::Misspec: return "misspec";
    case ExperimentKind::LimitLaw: return "limit-law";
    case ExperimentKind::Tables: return "tables";
  }
  return "unknown";
}

std::optional<ExperimentKind> experiment_kind_from_string(std::string_view name) noexcept {
  for (auto k : {ExperimentKind::Threshold, ExperimentKind::Tou3, ExperimentKind::Gof, ExperimentKind::Misspec,
                 ExperimentKind::LimitLaw, ExperimentKind::Tables}) {
    if (squash(to_string(k)) == squash(name)) return k;
  }
  return std::nullopt;
}

std::string_view library_version() noexcept { return "1.0.0"; }

std::string config_hash(const Json& j) {
  Json c = j;
  if (c.is_object()) {
    c.erase("workers");
    c.erase("out");
  }
  return hex64(fnv1a64(c.dump()));
}

ExperimentConfig parse_config(const Json& j) {
  const std::string root = "config";
  if (!j.is_object()) config_error(root, "expected a JSON object");
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.hash = config_hash(j);
  if (!j.contains("kind") || !j.at("kind").is_string()) config_error("kind", "missing experiment kind");
  const auto kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) config_error("kind", "unknown experiment kind '" + j.at("kind").get<std::string>() + "'");
  cfg.kind = *kind;
  const bool simulates = cfg.kind != ExperimentKind::LimitLaw && cfg.kind != ExperimentKind::Tables;

  if (j.contains("model")) cfg.model = model_from_json(j.at("model"), "model");
  if (j.contains("truth")) cfg.truth = model_from_json(j.at("truth"), "truth");
  if (simulates && !cfg.model) config_error("model", "missing");
  if (j.contains("box")) cfg.box = box_from_json(j.at("box"), "box");

  if (j.contains("durations")) {
    cfg.durations = number_array(j, "durations", root);
  } else if (j.contains("duration")) {
    cfg.durations = number_array(j, "duration", root);
  } else if (simulates) {
    config_error("durations", "missing");
  }
  for (double T : cfg.durations) {
    if (!(T > 0.0) || !std::isfinite(T)) config_error("durations", "must be positive");
  }
  cfg.dt = number_or(j, "dt", cfg.dt, root);
  if (!(cfg.dt > 0.0)) config_error("dt", "must be positive");
  for (double T : cfg.durations) {
    if (T < cfg.dt) config_error("durations", "each duration must be at least dt");
  }
  if (j.contains("replicates")) cfg.replicates = require_count(j, "replicates", root, 1);
  if (j.contains("seed")) cfg.seed = require_count(j, "seed", root, 0);
  if (j.contains("workers")) {
    const auto w = require_count(j, "workers", root, 0);
    cfg.workers = w == 0 ? default_workers() : static_cast<unsigned>(w);
  }
  if (j.contains("out")) {
    if (!j.at("out").is_string()) config_error("out", "expected a directory");
    cfg.out_dir = j.at("out").get<std::string>();
  }
  if (j.contains("estimators")) {
    cfg.estimators.clear();
    for (const auto& name : string_array(j, "estimators", root)) {
      const auto m = method_from_string(name);
      if (!m) config_error("estimators", "unknown estimator '" + name + "'");
      cfg.estimators.push_back(*m);
    }
  }
  if (j.contains("init")) cfg.init = init_from_json(j.at("init"), "init");
  if (j.contains("gamma_variant")) {
    const auto v = squash(j.at("gamma_variant").is_string() ? j.at("gamma_variant").get<std::string>() : "");
    if (v == "general") {
      cfg.gamma_variant = GammaVariant::General;
    } else if (v == "printed" || v == "printedtou") {
      cfg.gamma_variant = GammaVariant::PrintedTou;
    } else {
      config_error("gamma_variant", "expected \"general\" or \"printed\"");
    }
  }
  if (j.contains("statistics")) {
    cfg.statistics.clear();
    for (const auto& name : string_array(j, "statistics", root)) {
      std::optional<Statistic> s;
      for (auto c : {Statistic::W2, Statistic::D, Statistic::V2}) {
        if (squash(to_string(c)) == squash(name)) s = c;
      }
      if (!s) config_error("statistics", "unknown statistic '" + name + "'");
      cfg.statistics.push_back(*s);
    }
  }
  if (j.contains("alphas")) {
    cfg.alphas = number_array(j, "alphas", root);
  } else if (cfg.kind == ExperimentKind::Tables) {
    cfg.alphas = dense_alpha_grid();
  }
  for (double a : cfg.alphas) {
    if (!(a > 0.0 && a < 1.0)) config_error("alphas", "each level must lie in (0, 1)");
  }
  if (j.contains("composite")) {
    if (!j.at("composite").is_boolean()) config_error("composite", "expected true or false");
    cfg.composite = j.at("composite").get<bool>();
  }
  if (j.contains("tables")) {
    if (!j.at("tables").is_string()) config_error("tables", "expected a directory");
    cfg.tables_dir = j.at("tables").get<std::string>();
  }
  if (j.contains("contamination")) cfg.contamination = j.at("contamination");
  if (j.contains("draws")) cfg.draws = require_count(j, "draws", root, 1);
  if (j.contains("field_grid")) {
    const auto& g = j.at("field_grid");
    cfg.field_grid.half_width = number_or(g, "half_width", cfg.field_grid.half_width, "field_grid");
    cfg.field_grid.step = number_or(g, "step", cfg.field_grid.step, "field_grid");
    if (!(cfg.field_grid.step > 0.0 && cfg.field_grid.half_width > cfg.field_grid.step)) {
      config_error("field_grid", "needs 0 < step < half_width");
    }
  }
  if (j.contains("functional_grid")) {
    const auto& g = j.at("functional_grid");
    cfg.functional_grid.step = number_or(g, "step", cfg.functional_grid.step, "functional_grid");
    cfg.functional_grid.exp_horizon = number_or(g, "exp_horizon", cfg.functional_grid.exp_horizon, "functional_grid");
    if (!(cfg.functional_grid.step > 0.0 && cfg.functional_grid.exp_horizon > 1.0)) {
      config_error("functional_grid", "needs step > 0 and exp_horizon > 1");
    }
  }
  if (j.contains("functionals")) {
    for (const auto& name : string_array(j, "functionals", root)) {
      std::optional<Functional> f;
      for (auto c : {Functional::ArgmaxU, Functional::BayesU, Functional::IntW2_01, Functional::SupAbsW_01,
                     Functional::IntW2Exp}) {
        if (squash(to_string(c)) == squash(name)) f = c;
      }
      if (!f) config_error("functionals", "unknown functional '" + name + "'");
      cfg.functionals.push_back(*f);
    }
  }
  if (j.contains("bootstrap")) cfg.bootstrap = require_count(j, "bootstrap", root, 1);
  cfg.max_failure_rate = number_or(j, "max_failure_rate", cfg.max_failure_rate, root);

  const std::size_t k = cfg.model ? cfg.model->num_thresholds() : 0;
  switch (cfg.kind) {
    case ExperimentKind::Threshold: {
      check_estimators(cfg, {Method::Mle, Method::Bayes, Method::MoM, Method::Windowed});
      const bool switching_only = std::any_of(cfg.estimators.begin(), cfg.estimators.end(), [](Method m) {
        return m == Method::MoM || m == Method::Windowed;
      });
      if (switching_only && cfg.model->kind() != ModelKind::SimpleSwitching) {
        config_error("estimators", "MoM and Windowed need a SimpleSwitching model");
      }
      const bool scans = std::any_of(cfg.estimators.begin(), cfg.estimators.end(), [](Method m) {
        return m == Method::Mle || m == Method::Bayes;
      });
      if (scans && cfg.box.size() != k) {
        config_error("box", "needs one interval per threshold (" + std::to_string(k) + ")");
      }
      if (scans) {
        try {
          cfg.box.validate_ordered();
        } catch (const Error& e) {
          config_error("box", e.what());
        }
      }
      break;
    }
    case ExperimentKind::Tou3:
      if (!j.contains("estimators")) cfg.estimators = {Method::Profile};
      check_estimators(cfg, {Method::Profile, Method::TwoStage});
      if (cfg.model->kind() != ModelKind::Tou) config_error("model.kind", "tou3 experiments need a TOU model");
      if (cfg.box.size() != 3) config_error("box", "needs [rho1, rho2, theta] intervals");
      if (!(cfg.box[0].hi < cfg.box[1].lo && cfg.box[1].lo > 0.0)) {
        config_error("box", "rate intervals must satisfy hi(rho1) < lo(rho2) and lo(rho2) > 0");
      }
      break;
    case ExperimentKind::Gof:
      if (cfg.statistics.empty()) config_error("statistics", "empty");
      if (cfg.composite && cfg.box.size() != k) config_error("box", "composite tests need one interval per threshold");
      break;
    case ExperimentKind::Misspec:
      if (cfg.model->kind() != ModelKind::Tou) config_error("model.kind", "misspec experiments need a TOU model");
      if (cfg.box.size() != 1) config_error("box", "needs one threshold interval");
      if (cfg.contamination.is_null()) config_error("contamination", "missing");
      contamination_from_json(cfg.contamination, std::get<Tou>(cfg.model->variant()));
      break;
    case ExperimentKind::LimitLaw:
      if (cfg.functionals.empty()) cfg.functionals = {Functional::ArgmaxU, Functional::BayesU};
      if (cfg.draws == 0) config_error("draws", "missing");
      break;
    case ExperimentKind::Tables:
      if (cfg.functionals.empty()) {
        cfg.functionals = {Functional::IntW2_01, Functional::SupAbsW_01, Functional::IntW2Exp};
      }
      if (cfg.draws == 0) cfg.draws = 100000;
      break;
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::ConfigError, "cannot open config " + file);
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::ConfigError, file + ": " + e.what());
  }
  return parse_config(j);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.kind = std::string(to_string(cfg.kind));
  report.config_hash = cfg.hash.empty() ? config_hash(cfg.raw) : cfg.hash;
  report.seed = cfg.seed;
  switch (cfg.kind) {
    case ExperimentKind::Threshold: run_threshold(cfg, report); break;
    case ExperimentKind::Tou3: run_tou3(cfg, report); break;
    case ExperimentKind::Gof: run_gof(cfg, report); break;
    case ExperimentKind::Misspec: run_misspec(cfg, report); break;
    case ExperimentKind::LimitLaw: run_limit_law(cfg, report); break;
    case ExperimentKind::Tables: run_tables(cfg, report); break;
  }
  report.failure_breach = report.failure_rate() > cfg.max_failure_rate;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<QuantileTable> build_tables(const ExperimentConfig& cfg) {
  std::vector<QuantileTable> out;
  for (auto f : cfg.functionals) {
    QuantileTable t;
    if (f == Functional::ArgmaxU || f == Functional::BayesU) {
      const auto field = sample_field_batch(cfg.draws, cfg.field_grid, cfg.seed, cfg.workers);
      const auto& s = f == Functional::ArgmaxU ? field.argmax : field.posterior_mean;
      t = quantile_table(f, s.samples, cfg.alphas, cfg.seed, cfg.bootstrap);
      t.grid = cfg.field_grid.step;
    } else {
      const auto s = sample_functional_batch(f, cfg.draws, cfg.functional_grid, cfg.seed, cfg.workers);
      t = quantile_table(f, s.samples, cfg.alphas, cfg.seed, cfg.bootstrap);
      t.grid = cfg.functional_grid.step;
    }
    t.config_hash = cfg.hash.empty() ? config_hash(cfg.raw) : cfg.hash;
    write_quantile_table(t, cfg.tables_dir);
    out.push_back(std::move(t));
  }
  return out;
}

std::string replicates_csv(const ExperimentReport& report) {
  std::string out = "# config_hash=" + report.config_hash + " seed=" + std::to_string(report.seed) +
                    " kind=" + report.kind + "\n";
  out += "duration,replicate,stream,label,status";
  for (const auto& c : report.columns) out += "," + c;
  out += "\n";
  char buf[64];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.duration);
    out += buf;
    out += "," + std::to_string(r.replicate) + "," + std::to_string(r.stream) + "," + r.label + "," + r.status;
    for (double v : r.values) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

Json report_to_json(const ExperimentReport& report) {
  return {{"kind", report.kind},
          {"config_hash", report.config_hash},
          {"seed", report.seed},
          {"version", std::string(library_version())},
          {"records", report.records.size()},
          {"attempted", report.attempted},
          {"failures", report.failures},
          {"failure_rate", report.failure_rate()},
          {"failure_breach", report.failure_breach},
          {"seconds", report.seconds},
          {"summary", report.summary}};
}

void write_report(const ExperimentReport& report, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create " + dir + ": " + ec.message());
  {
    std::ofstream out(dir + "/report.json");
    if (!out) fail(ErrorKind::IoError, "cannot write " + dir + "/report.json");
    out << report_to_json(report).dump(2) << "\n";
  }
  std::ofstream out(dir + "/replicates.csv");
  if (!out) fail(ErrorKind::IoError, "cannot write " + dir + "/replicates.csv");
  out << replicates_csv(report);
}

}  // namespace tdiff
