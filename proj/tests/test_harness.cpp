#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdiff/error.hpp"
#include "tdiff/estimators.hpp"
#include "tdiff/harness.hpp"
#include "tdiff/simulate.hpp"

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

std::string config_message(const Json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) return e.what();
    return "wrong kind: " + std::string(e.what());
  }
  return "";
}

Json threshold_config() {
  return Json::parse(R"({
    "kind": "threshold",
    "model": {"kind": "TOU", "rho1": 1, "rho2": 4, "sigma": 1, "theta": 1},
    "box": [[0.5, 1.5]],
    "durations": [40, 80],
    "dt": 0.01,
    "replicates": 12,
    "seed": 77,
    "estimators": ["mle", "bayes"]
  })");
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& file) {
  std::stringstream buf;
  buf << std::ifstream(file).rdbuf();
  return buf.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TDIFF_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config errors name the offending field") {
  const Json good = threshold_config();
  CHECK(config_message(good).empty());

  const auto with = [&](const std::string& key, const Json& value) {
    Json j = good;
    j[key] = value;
    return config_message(j);
  };
  const auto without = [&](const std::string& key) {
    Json j = good;
    j.erase(key);
    return config_message(j);
  };
  CHECK(config_message(Json::array()).find("config") != std::string::npos);
  CHECK(without("kind").find("kind") != std::string::npos);
  CHECK(with("kind", "nonsense").find("kind") != std::string::npos);
  CHECK(without("model").find("model") != std::string::npos);
  CHECK(without("durations").find("durations") != std::string::npos);
  CHECK(with("durations", Json::array({-1.0})).find("durations") != std::string::npos);
  CHECK(with("dt", 0.0).find("dt") != std::string::npos);
  CHECK(with("durations", Json::array({0.001})).find("durations") != std::string::npos);
  CHECK(with("replicates", 0).find("replicates") != std::string::npos);
  CHECK(with("replicates", "many").find("replicates") != std::string::npos);
  CHECK(with("estimators", Json::array({"guess"})).find("estimators") != std::string::npos);
  CHECK(with("estimators", Json::array({"mom"})).find("estimators") != std::string::npos);
  CHECK(with("box", Json::array({Json::array({1.5, 0.5})})).find("box") != std::string::npos);
  CHECK(with("box", Json::array()).find("box") != std::string::npos);
  CHECK(with("alphas", Json::array({1.5})).find("alphas") != std::string::npos);
  CHECK(with("gamma_variant", "other").find("gamma_variant") != std::string::npos);
  CHECK(with("model", Json{{"kind", "TOU"}, {"rho1", 1}}).find("model") != std::string::npos);
  CHECK(with("model", Json{{"kind", "Cubic"}}).find("model.kind") != std::string::npos);
  CHECK(with("model", Json{{"kind", "TOU"}, {"rho1", 1}, {"rho2", 4}, {"sigma", -1}, {"theta", 1}})
            .find("model") != std::string::npos);

  Json tou3 = good;
  tou3["kind"] = "tou3";
  tou3.erase("estimators");
  CHECK(config_message(tou3).find("box") != std::string::npos);
  tou3["box"] = Json::array({Json::array({0.1, 3.0}), Json::array({1.0, 10.0}), Json::array({0.5, 1.5})});
  CHECK(config_message(tou3).find("box") != std::string::npos);
  tou3["box"][0] = Json::array({0.1, 2.0});
  tou3["box"][1] = Json::array({2.5, 10.0});
  CHECK(config_message(tou3).empty());
  Json mis = good;
  mis["kind"] = "misspec";
  mis.erase("estimators");
  CHECK(config_message(mis).find("contamination") != std::string::npos);
  CHECK(config_message(Json{{"kind", "limit-law"}}).find("draws") != std::string::npos);
  CHECK(config_message(Json{{"kind", "tables"}}).empty());

  CHECK(throws_kind(ErrorKind::ConfigError, [] { load_config("/nonexistent/config.json"); }));
}

TEST_CASE("outputs do not depend on the worker count") {
  std::string reference;
  for (unsigned w : {1u, 4u, 16u}) {
    Json j = threshold_config();
    j["workers"] = w;
    const auto report = run_experiment(parse_config(j));
    CHECK(report.records.size() == 2 * 12 * 2);
    CHECK(report.failures == 0);
    const auto csv = replicates_csv(report);
    if (reference.empty()) {
      reference = csv;
    } else {
      CHECK(csv == reference);
    }
  }
  // Run-only fields do not enter the hash.
  Json a = threshold_config(), b = threshold_config();
  b["workers"] = 8;
  b["out"] = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b["seed"] = 78;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("a single replicate equals the manual pipeline on stream 0") {
  Json j = threshold_config();
  j["replicates"] = 1;
  j["durations"] = Json::array({60.0, 90.0});
  const auto cfg = parse_config(j);
  const auto report = run_experiment(cfg);
  REQUIRE(report.records.size() == 4);
  const ModelSpec model = Tou{1.0, 4.0, 1.0, 1.0};
  for (std::size_t t = 0; t < 2; ++t) {
    // Replicate i at duration index t draws stream t * replicates + i.
    const auto path = simulate_path(model, cfg.durations[t], 0.01, RngStream{77, t});
    const auto mle = mle_threshold(path, model, cfg.box);
    const auto bayes = bayes_threshold(path, model, cfg.box);
    const auto& rm = report.records[2 * t];
    const auto& rb = report.records[2 * t + 1];
    CHECK(rm.stream == t);
    CHECK(rm.label == "MLE");
    CHECK(rb.label == "Bayes");
    CHECK(rm.values[0] == mle.point()[0]);
    CHECK(rb.values[0] == bayes.point()[0]);
    CHECK(rm.values[1] == doctest::Approx(cfg.durations[t] * (mle.point()[0] - 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("every output file carries the config hash and seed") {
  const auto dir = scratch("tdiff_harness_out");
  const auto cfg = parse_config(threshold_config());
  const auto report = run_experiment(cfg);
  write_report(report, dir.string());
  const auto csv = slurp(dir / "replicates.csv");
  CHECK(csv.rfind("# config_hash=" + cfg.hash + " seed=77", 0) == 0);
  const auto json = Json::parse(slurp(dir / "report.json"));
  CHECK(json.at("config_hash") == cfg.hash);
  CHECK(json.at("seed") == 77);
  CHECK(json.at("version") == std::string(library_version()));
  CHECK(json.at("records") == report.records.size());
  CHECK(json.at("summary").contains("durations"));

  Json tables = {{"kind", "tables"}, {"functionals", {"IntW2_01"}}, {"draws", 500}, {"bootstrap", 20},
                 {"alphas", {0.05, 0.5}}, {"seed", 5}, {"tables", (dir / "tables").string()}};
  const auto tcfg = parse_config(tables);
  const auto built = build_tables(tcfg);
  REQUIRE(built.size() == 1);
  const auto back = read_quantile_table((dir / "tables").string(), Functional::IntW2_01);
  CHECK(back.config_hash == tcfg.hash);
  CHECK(back.seed == 5);
  CHECK(build_tables(tcfg)[0].entries[0].threshold == built[0].entries[0].threshold);
  std::filesystem::remove_all(dir);
}

TEST_CASE("per-replicate failures are recorded and a high rate is flagged") {
  // Two-stage estimation refuses horizons with sqrt(T) < 10.
  Json j = Json::parse(R"({
    "kind": "tou3",
    "model": {"kind": "TOU", "rho1": 1, "rho2": 4, "sigma": 1, "theta": 1},
    "box": [[0.2, 2], [2.5, 8], [0.5, 1.5]],
    "durations": [50],
    "dt": 0.01,
    "replicates": 4,
    "estimators": ["two-stage"]
  })");
  const auto report = run_experiment(parse_config(j));
  CHECK(report.records.size() == 4);
  CHECK(report.failures == 4);
  CHECK(report.failure_breach);
  for (const auto& r : report.records) CHECK(r.status == "InvalidArgument");
  CHECK(!run_experiment(parse_config(threshold_config())).failure_breach);
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch("tdiff_cli_test");
  const auto write = [&](const std::string& name, const Json& j) {
    const auto file = dir / name;
    std::ofstream(file) << j.dump(2);
    return file.string();
  };
  Json ok = threshold_config();
  ok["durations"] = Json::array({30.0});
  ok["replicates"] = 3;
  const auto good = write("good.json", ok);
  CHECK(run_cli("experiment --config " + good + " --out " + (dir / "run").string()) == 0);
  CHECK(std::filesystem::exists(dir / "run" / "report.json"));
  CHECK(std::filesystem::exists(dir / "run" / "replicates.csv"));
  // A seed override changes the hash recorded in the outputs.
  CHECK(run_cli("experiment --config " + good + " --seed 9 --out " + (dir / "run9").string()) == 0);
  CHECK(Json::parse(slurp(dir / "run9" / "report.json")).at("seed") == 9);
  CHECK(Json::parse(slurp(dir / "run9" / "report.json")).at("config_hash") !=
        Json::parse(slurp(dir / "run" / "report.json")).at("config_hash"));

  Json bad = ok;
  bad["dt"] = -1.0;
  CHECK(run_cli("experiment --config " + write("bad.json", bad)) == 2);
  CHECK(run_cli("experiment --config " + (dir / "missing.json").string()) == 2);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run_cli("experiment --config " + (dir / "broken.json").string()) == 2);
  CHECK(run_cli("experiment") == 2);
  CHECK(run_cli("gof --config " + good) == 2);

  Json breach = Json::parse(R"({
    "kind": "tou3",
    "model": {"kind": "TOU", "rho1": 1, "rho2": 4, "sigma": 1, "theta": 1},
    "box": [[0.2, 2], [2.5, 8], [0.5, 1.5]],
    "durations": [50],
    "dt": 0.01,
    "replicates": 2,
    "estimators": ["two-stage"]
  })");
  CHECK(run_cli("experiment --config " + write("breach.json", breach) + " --out " + (dir / "b").string()) == 3);

  CHECK(run_cli("simulate --config " + good + " --out " + (dir / "sim").string()) == 0);
  CHECK(run_cli("estimate --config " + good + " --path " + (dir / "sim" / "path.csv").string() + " --out " +
                (dir / "est").string()) == 0);
  CHECK(std::filesystem::exists(dir / "est" / "estimate.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("shipped example configs parse") {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(TDIFF_DATA_DIR "/../docs/configs")) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    auto j = Json::parse(slurp(entry.path()));
    if (!j.contains("kind")) j["kind"] = "threshold";
    if (!j.contains("durations") && j.contains("duration")) j["durations"] = Json::array({j.at("duration")});
    CHECK_NOTHROW(parse_config(j));
    ++n;
  }
  CHECK(n >= 8);
}
