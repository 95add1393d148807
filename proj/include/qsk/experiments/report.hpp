#pragma once

#include <chrono>
#include <deque>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <openssl/evp.h>

#include "qsk/experiments/config.hpp"

namespace qsk::experiments {

/// One PASS/FAIL line: value relation tolerance, with the producing operation.
struct Check {
  std::string id;
  std::string description;
  std::string operation;
  double value = 0.0;
  double std_error = 0.0;
  std::string relation = "<=";  ///< "<=", ">=", "<", ">"
  double tolerance = 0.0;
  bool pass = false;

  json to_json() const {
    return {{"id", id},           {"description", description}, {"operation", operation}, {"value", value},
            {"std_error", std_error}, {"relation", relation},   {"tolerance", tolerance}, {"pass", pass}};
  }
};

/// Builds a check and evaluates its relation.
inline Check make_check(std::string id, std::string description, std::string operation, double value,
                        double std_error, std::string relation, double tolerance) {
  Check c{std::move(id), std::move(description), std::move(operation), value, std_error, std::move(relation), tolerance};
  if (c.relation == "<=") c.pass = value <= tolerance;
  else if (c.relation == "<") c.pass = value < tolerance;
  else if (c.relation == ">=") c.pass = value >= tolerance;
  else if (c.relation == ">") c.pass = value > tolerance;
  else throw std::invalid_argument("make_check: unknown relation " + c.relation);
  return c;
}

/// A fitted or estimated constant with its standard error.
struct Constant {
  std::string name;
  double value = 0.0;
  double std_error = 0.0;
  std::string operation;

  json to_json() const { return {{"name", name}, {"value", value}, {"std_error", std_error}, {"operation", operation}}; }
};

/// A CSV table whose first line names a versioned column schema.
struct Table {
  using Cell = std::variant<std::string, double, long long>;

  std::string name;    ///< file stem
  std::string schema;  ///< e.g. "qsk.identities/1"
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  Table(std::string n, std::string s, std::vector<std::string> cols)
      : name(std::move(n)), schema(std::move(s)), columns(std::move(cols)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::invalid_argument("Table " + name + ": row width mismatch");
    rows.push_back(std::move(row));
  }

  static std::string format(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(c));
    return buf;
  }

  std::string csv() const {
    std::string out = "# schema: " + schema + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format(row[i]);
      out += "\n";
    }
    return out;
  }
};

inline Table::Cell cell(double v) { return v; }
inline Table::Cell cell(int v) { return static_cast<long long>(v); }
inline Table::Cell cell(std::size_t v) { return static_cast<long long>(v); }
inline Table::Cell cell(std::string v) { return v; }

struct RunReport {
  RunConfig config;
  std::vector<Check> checks;
  std::vector<Constant> constants;
  std::deque<Table> tables;  ///< deque: references stay valid as tables are added

  bool passed() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  json summary() const {
    json checks_j = json::array(), consts_j = json::array(), tables_j = json::array();
    for (const auto& c : checks) checks_j.push_back(c.to_json());
    for (const auto& c : constants) consts_j.push_back(c.to_json());
    for (const auto& t : tables) tables_j.push_back({{"file", t.name + ".csv"}, {"schema", t.schema}, {"rows", t.rows.size()}});
    return {{"config", config.to_json()},
            {"passed", passed()},
            {"checks", checks_j},
            {"constants", consts_j},
            {"tables", tables_j}};
  }
};

struct ManifestEntry {
  std::string file;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct Manifest {
  std::filesystem::path directory;
  std::vector<ManifestEntry> files;
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << data;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

/// <dir>/<scenario>-<UTC timestamp>, with a numeric suffix when taken.
inline std::filesystem::path fresh_directory(const std::filesystem::path& dir, const std::string& scenario) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  std::filesystem::create_directories(dir);
  const std::string base = scenario + "-" + stamp;
  for (int k = 0;; ++k) {
    const auto p = dir / (k == 0 ? base : base + "-" + std::to_string(k));
    if (std::filesystem::create_directory(p)) return p;
  }
}

}  // namespace detail

/// Writes every table as CSV plus summary.json into a new timestamped
/// subdirectory of `dir`, then manifest.json with the SHA-256 of each file.
inline Manifest emit_report(const RunReport& report, const std::filesystem::path& dir) {
  Manifest m;
  m.directory = detail::fresh_directory(dir, report.config.scenario.empty() ? "run" : report.config.scenario);
  const auto put = [&](const std::string& name, const std::string& data) {
    detail::write_file(m.directory / name, data);
    m.files.push_back({name, sha256_hex(data), data.size()});
  };
  for (const auto& t : report.tables) put(t.name + ".csv", t.csv());
  put("summary.json", report.summary().dump(2) + "\n");
  json files = json::array();
  for (const auto& e : m.files) files.push_back({{"file", e.file}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  detail::write_file(m.directory / "manifest.json", json{{"files", files}}.dump(2) + "\n");
  return m;
}

}  // namespace qsk::experiments
