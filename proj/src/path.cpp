#include "tdiff/path.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "tdiff/error.hpp"

namespace tdiff {

void Path::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorKind::InvalidArgument, "path step dt must be positive");
  if (values.size() < 2) fail(ErrorKind::InvalidArgument, "path needs at least two samples");
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "path contains a non-finite value");
  }
}

PathView PathView::slice(std::size_t first, std::size_t last) const {
  if (first > last || last >= values.size()) {
    fail(ErrorKind::IndexOutOfRange, "path slice out of range");
  }
  return PathView(values.subspan(first, last - first + 1), dt, t0 + static_cast<double>(first) * dt);
}

std::size_t sqrt_horizon_steps(double duration, double dt) {
  return static_cast<std::size_t>(std::floor(std::sqrt(duration) / dt + 1e-9));
}

double empirical_cdf(PathView path, double x) {
  const std::size_t n = path.steps();
  if (n == 0) return 0.0;
  std::size_t below = 0;
  for (std::size_t i = 0; i < n; ++i) below += path[i] < x ? 1 : 0;
  return static_cast<double>(below) / static_cast<double>(n);
}

EmpiricalCdf::EmpiricalCdf(PathView path) {
  const std::size_t n = path.steps();
  if (n == 0) fail(ErrorKind::InvalidArgument, "empirical CDF needs at least one step");
  sorted_.assign(path.values.begin(), path.values.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
  const auto below = std::lower_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
  return static_cast<double>(below) / static_cast<double>(sorted_.size());
}

double tanaka_local_time(PathView path, double x) {
  const std::size_t n = path.steps();
  if (n == 0) return 0.0;
  double integral = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = path[i] - x;
    const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    integral += sgn * (path[i + 1] - path[i]);
  }
  return std::abs(path[n] - x) - std::abs(path[0] - x) - integral;
}

double local_time_density(PathView path, const ModelSpec& model, double x) {
  const double s = model.sigma(x);
  if (!(s > 0.0)) fail(ErrorKind::DegenerateSigma, "local-time density needs sigma(x) > 0");
  const double T = path.duration();
  if (!(T > 0.0)) return 0.0;
  return tanaka_local_time(path, x) / (T * s * s);
}

double kernel_occupation_density(PathView path, double x, double bandwidth) {
  if (!(bandwidth > 0.0)) fail(ErrorKind::InvalidArgument, "kernel bandwidth must be positive");
  const std::size_t n = path.steps();
  if (n == 0) return 0.0;
  const double inv = 1.0 / bandwidth;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (path[i] - x) * inv;
    if (std::abs(z) < 9.0) sum += std::exp(-0.5 * z * z);
  }
  return sum * inv / (std::sqrt(2.0 * std::numbers::pi) * static_cast<double>(n));
}

void write_path_csv(const Path& path, const std::string& file) {
  std::ofstream out(file);
  if (!out) fail(ErrorKind::IoError, "cannot open " + file + " for writing");
  out << "t,x\n" << std::setprecision(17);
  for (std::size_t i = 0; i < path.values.size(); ++i) {
    out << path.t0 + static_cast<double>(i) * path.dt << ',' << path.values[i] << '\n';
  }
  if (!out) fail(ErrorKind::IoError, "failed writing " + file);

  nlohmann::json meta = {{"dt", path.dt},
                         {"t0", path.t0},
                         {"seed", path.seed},
                         {"stream", path.stream},
                         {"model_id", path.model_id},
                         {"sigma_used", path.sigma_used},
                         {"samples", path.values.size()}};
  std::ofstream side(file + ".json");
  if (!side) fail(ErrorKind::IoError, "cannot open " + file + ".json for writing");
  side << meta.dump(2) << '\n';
}

Path read_path_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::IoError, "cannot open " + file);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,x", 0) != 0) {
    fail(ErrorKind::IoError, file + ": expected header `t,x`");
  }
  Path path;
  std::vector<double> times;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(ErrorKind::IoError, file + ": malformed row " + std::to_string(row));
    try {
      times.push_back(std::stod(line.substr(0, comma)));
      path.values.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      fail(ErrorKind::IoError, file + ": malformed number on row " + std::to_string(row));
    }
  }
  if (times.size() >= 2) {
    path.t0 = times.front();
    path.dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  }

  std::ifstream side(file + ".json");
  if (side) {
    try {
      const auto meta = nlohmann::json::parse(side);
      path.dt = meta.value("dt", path.dt);
      path.t0 = meta.value("t0", path.t0);
      path.seed = meta.value("seed", std::uint64_t{0});
      path.stream = meta.value("stream", std::uint64_t{0});
      path.model_id = meta.value("model_id", std::string{});
      path.sigma_used = meta.value("sigma_used", std::string{});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::IoError, file + ".json: " + e.what());
    }
  }
  path.validate();
  return path;
}

}  // namespace tdiff
