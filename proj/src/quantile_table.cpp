#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "tdiff/error.hpp"
#include "tdiff/hash.hpp"
#include "tdiff/limit_laws.hpp"

namespace tdiff {

namespace {

constexpr const char* kMagic = "# tdiff-quantile-table v1";
constexpr const char* kColumns = "alpha,threshold,se,replicates,grid";

std::string body_of(const QuantileTable& table) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << kColumns << '\n';
  for (const auto& e : table.entries) {
    out << e.alpha << ',' << e.threshold << ',' << e.se << ',' << table.replicates << ',' << table.grid << '\n';
  }
  return out.str();
}

std::string value_after(const std::string& line, const std::string& key) {
  const std::string prefix = "# " + key + "=";
  return line.rfind(prefix, 0) == 0 ? line.substr(prefix.size()) : std::string{};
}

}  // namespace

std::string table_file(const std::string& dir, Functional tag) {
  return (std::filesystem::path(dir) / (std::string(to_string(tag)) + ".csv")).string();
}

void write_quantile_table(const QuantileTable& table, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string file = table_file(dir, table.tag);
  std::ofstream out(file);
  if (!out) fail(ErrorKind::IoError, "cannot open " + file + " for writing");
  const std::string body = body_of(table);
  out << std::setprecision(17);
  out << kMagic << '\n';
  out << "# functional=" << to_string(table.tag) << '\n';
  out << "# seed=" << table.seed << '\n';
  out << "# config_hash=" << table.config_hash << '\n';
  out << "# mean=" << table.mean << '\n';
  out << "# variance=" << table.variance << '\n';
  out << "# checksum=fnv1a64:" << hex64(fnv1a64(body)) << '\n';
  out << body;
  if (!out) fail(ErrorKind::IoError, "failed writing " + file);
}

QuantileTable read_quantile_table(const std::string& dir, Functional tag) {
  const std::string file = table_file(dir, tag);
  std::ifstream in(file);
  if (!in) fail(ErrorKind::IoError, "quantile table not found: " + file);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) fail(ErrorKind::IoError, file + ": not a v1 quantile table");

  QuantileTable table;
  table.tag = tag;
  std::string checksum;
  std::string body;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      if (auto v = value_after(line, "functional"); !v.empty() && v != to_string(tag)) {
        fail(ErrorKind::IoError, file + ": table is for functional " + v);
      }
      if (auto v = value_after(line, "seed"); !v.empty()) table.seed = std::stoull(v);
      if (auto v = value_after(line, "config_hash"); !v.empty()) table.config_hash = v;
      if (auto v = value_after(line, "mean"); !v.empty()) table.mean = std::stod(v);
      if (auto v = value_after(line, "variance"); !v.empty()) table.variance = std::stod(v);
      if (auto v = value_after(line, "checksum"); !v.empty()) checksum = v;
      continue;
    }
    body += line;
    body += '\n';
  }
  if (checksum != "fnv1a64:" + hex64(fnv1a64(body))) {
    fail(ErrorKind::IoError, file + ": checksum mismatch");
  }
  std::istringstream rows(body);
  std::getline(rows, line);
  if (line != kColumns) fail(ErrorKind::IoError, file + ": unexpected column header");
  while (std::getline(rows, line)) {
    if (line.empty()) continue;
    QuantileEntry e;
    unsigned long long reps = 0;
    double grid = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%llu,%lf", &e.alpha, &e.threshold, &e.se, &reps, &grid) != 5) {
      fail(ErrorKind::IoError, file + ": malformed row: " + line);
    }
    table.replicates = reps;
    table.grid = grid;
    table.entries.push_back(e);
  }
  if (table.entries.empty()) fail(ErrorKind::IoError, file + ": no entries");
  return table;
}

}  // namespace tdiff
