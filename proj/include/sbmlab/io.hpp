#pragma once
// CSV and JSON output.  All numbers go through std::to_chars so the decimal
// separator is '.' regardless of the process locale and identical inputs
// serialize to identical bytes.

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "sbmlab/check.hpp"
#include "sbmlab/verify.hpp"

namespace sbmlab {

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) os << ',';
    os << columns[i];
  }
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << format_double(row[i]);
    }
    os << '\n';
  }
}

inline void write_csv(std::ostream& os, const SampleTable& table) {
  write_csv(os, table.columns, table.rows);
}

inline void save_csv(const std::string& path, const std::vector<std::string>& columns,
                     const std::vector<std::vector<double>>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(os, columns, rows);
}

inline void save_csv(const std::string& path, const SampleTable& table) {
  save_csv(path, table.columns, table.rows);
}

inline nlohmann::ordered_json check_to_json(const CheckResult& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["estimate"] = c.observed;
  j["stderr"] = c.std_error;
  j["target"] = c.expected;
  j["tolerance_rule"] = c.rule;
  j["pass"] = c.pass;
  return j;
}

inline nlohmann::ordered_json table_to_json(const SampleTable& t) {
  nlohmann::ordered_json j;
  j["name"] = t.name;
  j["columns"] = t.columns;
  j["rows"] = t.rows;
  return j;
}

inline nlohmann::ordered_json report_to_json(const ExperimentReport& rep) {
  nlohmann::ordered_json j;
  j["experiment"] = rep.experiment;
  j["passed"] = rep.passed();
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : rep.checks) j["checks"].push_back(check_to_json(c));
  j["tables"] = nlohmann::ordered_json::array();
  for (const auto& t : rep.tables) j["tables"].push_back(t.name);
  return j;
}

inline nlohmann::ordered_json reports_to_json(const std::vector<ExperimentReport>& reps,
                                              std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  bool ok = true;
  j["experiments"] = nlohmann::ordered_json::array();
  for (const auto& r : reps) {
    j["experiments"].push_back(report_to_json(r));
    ok = ok && r.passed();
  }
  j["passed"] = ok;
  return j;
}

}  // namespace sbmlab
