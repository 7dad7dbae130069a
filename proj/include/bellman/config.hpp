#pragma once

// Experiment configs: top-level defaults followed by [run] sections of
// key = value lines. '#' starts a comment. Every key is typed and checked
// at parse time so that errors carry a line and column.

#include <cmath>
#include <complex>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bellman/catalog.hpp"
#include "bellman/pde_conditions.hpp"
#include "bellman/verifiers.hpp"

namespace bellman {

class config_error : public usage_error {
 public:
  config_error(int line, int column, const std::string& msg)
      : usage_error("config:" + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

struct ConfigValue {
  std::string text;
  int line = 0;
  int column = 0;      // of the value
  int key_column = 0;  // of the key
};

struct RunConfig {
  std::string name;
  std::string kind;
  std::string check;
  int line = 0;
  std::map<std::string, ConfigValue> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  const std::string& text(const std::string& key) const { return values.at(key).text; }
  std::string text_or(const std::string& key, const std::string& dflt) const {
    return has(key) ? text(key) : dflt;
  }
  double number(const std::string& key) const { return parse_number(text(key), key); }
  double number_or(const std::string& key, double dflt) const { return has(key) ? number(key) : dflt; }
  std::vector<double> numbers(const std::string& key) const;
  std::vector<double> numbers_or(const std::string& key, std::vector<double> dflt) const {
    return has(key) ? numbers(key) : dflt;
  }
};

struct ExperimentConfig {
  std::string experiment = "unnamed";
  double tol = 1e-8;
  int grid = 21;
  int order = 64;
  unsigned long seed = 20240611;
  std::vector<RunConfig> runs;
};

namespace detail {

enum class KeyType { number, integer, numbers, word, candidate, surface, cspec, matrix, data, intervals, complexes };

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(trim(tok));
  return out;
}

inline std::vector<double> parse_numbers(const std::string& s, const std::string& ctx) {
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) {
    if (tok.empty()) throw usage_error(ctx + ": empty list entry");
    out.push_back(parse_number(tok, ctx));
  }
  return out;
}

inline double parse_extended(const std::string& tok, const std::string& ctx) {
  const std::string t = trim(tok);
  const double inf = std::numeric_limits<double>::infinity();
  if (t == "inf" || t == "+inf") return inf;
  if (t == "-inf") return -inf;
  return parse_number(t, ctx);
}

}  // namespace detail

inline std::vector<double> RunConfig::numbers(const std::string& key) const {
  return detail::parse_numbers(text(key), key);
}

/// Rows separated by ';', entries by ','.
inline Matrix parse_matrix(const std::string& s) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : detail::split(s, ';')) rows.push_back(detail::parse_numbers(r, "matrix"));
  if (rows.empty() || rows.front().empty()) throw usage_error("matrix: empty");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw usage_error("matrix: ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

/// correlated:p=...  -> [[1, p], [0, sqrt(1-p²)]]
/// ehrhard:b=b1,b2   -> [[1, 0, b1], [0, 1, b2]]
/// otherwise a literal matrix.
inline Matrix parse_columns(const std::string& s) {
  if (s.find(':') == std::string::npos) return parse_matrix(s);
  const CandidateSpec spec = parse_candidate_spec(s);
  if (spec.name == "correlated") {
    const double p = spec.scalar("p");
    if (!(std::abs(p) < 1)) throw usage_error("columns: need |p| < 1");
    Matrix a(2, 2);
    a << 1, p, 0, std::sqrt(1 - p * p);
    return a;
  }
  if (spec.name == "ehrhard") {
    const auto b = spec.list("b");
    if (b.size() != 2) throw usage_error("columns: ehrhard needs two coefficients");
    Matrix a(2, 3);
    a << 1, 0, b[0], 0, 1, b[1];
    return a;
  }
  throw usage_error("columns: unknown shorthand '" + spec.name + "'");
}

/// identity | auto-A1:b=... | literal matrix.
inline SymMatrix parse_c(const std::string& s, int k) {
  const std::string t = trim(s);
  if (t == "identity") return SymMatrix::identity(k);
  if (t.rfind("auto-A1", 0) == 0) {
    const CandidateSpec spec = parse_candidate_spec(t);
    const auto con = construct_C_for_b(spec.list("b"));
    if (!con.c) throw precondition_error("auto-A1: " + con.reason);
    return *con.c;
  }
  return SymMatrix(parse_matrix(t));
}

/// Interval list "l:r; l:r" with inf allowed.
inline std::vector<std::pair<double, double>> parse_intervals(const std::string& s) {
  std::vector<std::pair<double, double>> out;
  for (const auto& part : detail::split(s, ';')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw usage_error("interval '" + part + "' needs lo:hi");
    const double lo = detail::parse_extended(part.substr(0, colon), "interval");
    const double hi = detail::parse_extended(part.substr(colon + 1), "interval");
    if (!(lo < hi)) throw usage_error("interval '" + part + "' is empty");
    out.push_back({lo, hi});
  }
  return out;
}

/// "re+im i" entries separated by ';' or plain reals.
inline std::vector<std::complex<double>> parse_complexes(const std::string& s) {
  std::vector<std::complex<double>> out;
  for (auto tok : detail::split(s, ';')) {
    if (tok.empty()) throw usage_error("complex list: empty entry");
    if (tok.back() != 'i') {
      out.emplace_back(parse_number(tok, "complex"), 0.0);
      continue;
    }
    tok.pop_back();
    const auto pos = tok.find_last_of("+-");
    if (pos == std::string::npos || pos == 0) {
      out.emplace_back(0.0, tok.empty() || tok == "+" ? 1.0 : tok == "-" ? -1.0 : parse_number(tok, "complex"));
      continue;
    }
    const std::string im = tok.substr(pos);
    out.emplace_back(parse_number(tok.substr(0, pos), "complex"),
                     im == "+" ? 1.0 : im == "-" ? -1.0 : parse_number(im, "complex"));
  }
  return out;
}

namespace detail {

/// Datum specs: ray:at,width,delta | interval:lo,hi,width,delta |
/// bump:base,amp,center,width | const:v | pl:x=...,y=...
inline InitialDatum parse_datum(const std::string& text) {
  const CandidateSpec s = parse_candidate_spec(text);
  const double inf = std::numeric_limits<double>::infinity();
  if (s.name == "ray" || s.name == "interval") {
    if (s.name == "ray") require_keys(s, {"at", "width", "delta"});
    else require_keys(s, {"lo", "hi", "width", "delta"});
    const double delta = s.scalar_or("delta", 0.0);
    const double lo = s.name == "ray" ? -inf : s.scalar("lo");
    const double hi = s.name == "ray" ? s.scalar("at") : s.scalar("hi");
    return IndicatorDatum{{{lo, hi}}, s.scalar_or("width", 1e-3), delta, 1 - 2 * delta};
  }
  if (s.name == "bump") {
    require_keys(s, {"base", "amp", "center", "width"});
    return BumpDatum{s.scalar_or("base", 0), s.scalar_or("amp", 1), s.scalar_or("center", 0), s.scalar_or("width", 1)};
  }
  if (s.name == "const") require_keys(s, {"v"});
  if (s.name == "const") return BumpDatum{s.scalar("v"), 0, 0, 1};
  if (s.name == "pl") require_keys(s, {"x", "y"});
  if (s.name == "pl") return PiecewiseLinearDatum{s.list("x"), s.list("y")};
  throw usage_error("unknown datum '" + s.name + "'");
}

inline TestFunctionSet parse_data(const std::string& text) {
  TestFunctionSet t;
  bool indicator = false;
  for (const auto& part : split(text, ';')) {
    t.u.push_back(parse_datum(part));
    validate_datum(t.u.back());
    if (std::holds_alternative<IndicatorDatum>(t.u.back())) indicator = true;
  }
  if (indicator) t.tag = Smoothness::mollified_indicator;
  return t;
}

using KeyTable = std::map<std::string, KeyType>;

inline const std::map<std::string, std::map<std::string, KeyTable>>& run_schema() {
  using K = KeyType;
  static const std::map<std::string, std::map<std::string, KeyTable>> s = {
      {"check-pde",
       {{"first-type", {{"candidate", K::candidate}, {"columns", K::matrix}, {"C", K::cspec}, {"lo", K::number},
                        {"hi", K::number}}},
        {"second-type", {{"candidate", K::candidate}, {"columns", K::matrix}, {"C", K::cspec}, {"lo", K::number},
                         {"hi", K::number}}},
        {"reduced-H", {{"surface", K::surface}, {"an", K::numbers}, {"C", K::cspec}, {"lo", K::number},
                       {"hi", K::number}, {"mode", K::word}}},
        {"general-rank", {{"candidate", K::candidate}, {"p", K::number}, {"width", K::integer}, {"data", K::data},
                          {"lo", K::number}, {"hi", K::number}}},
        {"kernel-algebra", {{"instances", K::integer}}},
        {"tensorization", {{"p", K::number}, {"u", K::number}, {"v", K::number}, {"n", K::numbers}}}}},
      {"flow",
       {{"energy", {{"candidate", K::candidate}, {"columns", K::matrix}, {"C", K::cspec}, {"data", K::data},
                    {"samples", K::integer}, {"t_max", K::number}, {"measure", K::word}, {"limit_tol", K::number}}},
        {"hill", {{"alpha", K::numbers}, {"data", K::data}, {"T", K::number}, {"samples", K::integer},
                  {"space", K::integer}, {"half_width", K::number}}}}},
      {"verify",
       {{"orthant", {{"p", K::number}, {"u", K::number}, {"v", K::number}, {"expect", K::number}}},
        {"hypercontractivity", {{"P", K::number}, {"t", K::numbers}, {"c", K::numbers}, {"inflate", K::number}}},
        {"gmc", {{"candidate", K::candidate}, {"columns", K::matrix}, {"C", K::cspec}, {"data", K::data}}},
        {"converse", {{"candidate", K::candidate}, {"columns", K::matrix}, {"C", K::cspec},
                      {"threshold", K::number}}},
        {"borell-stability", {{"p", K::number}, {"A", K::intervals}, {"B", K::intervals}}},
        {"isoperimetry", {{"A", K::intervals}, {"t", K::numbers}, {"strict", K::number}}},
        {"brunn-minkowski", {{"lambda", K::numbers}, {"U", K::intervals}, {"V", K::intervals}}},
        {"ehrhard-pl", {{"profile", K::word}, {"b", K::numbers}, {"data", K::data}}}}},
      {"dbar",
       {{"residual", {{"coeffs", K::complexes}, {"radius", K::number}, {"points", K::integer}}},
        {"compatibility", {{"count", K::integer}, {"c_min", K::number}, {"c_max", K::number}}},
        {"monge-ampere", {{"candidate", K::candidate}, {"c", K::number}, {"lo", K::number}, {"hi", K::number}}},
        {"hodograph", {{"candidate", K::candidate}, {"c", K::number}, {"lo", K::number}, {"hi", K::number}}}}},
      {"region", {{"hyper", {{"p", K::number}, {"lo", K::number}, {"hi", K::number}}}}},
  };
  return s;
}

// Keys every run accepts.
inline const KeyTable& common_keys() {
  using K = KeyType;
  static const KeyTable t = {{"kind", K::word}, {"check", K::word}, {"tol", K::number}, {"grid", K::integer},
                             {"order", K::integer}, {"seed", K::integer}, {"csv", K::word}};
  return t;
}

inline void validate_value(KeyType type, const std::string& key, const std::string& v) {
  switch (type) {
    case KeyType::number: parse_number(v, key); break;
    case KeyType::integer: {
      const double d = parse_number(v, key);
      if (d != std::floor(d) || d < 0) throw usage_error(key + ": expected a non-negative integer");
      break;
    }
    case KeyType::numbers: parse_numbers(v, key); break;
    case KeyType::word:
      if (v.empty()) throw usage_error(key + ": empty value");
      break;
    case KeyType::candidate: make_candidate(v); break;
    case KeyType::surface: make_surface(v); break;
    case KeyType::cspec: {
      const std::string t = trim(v);
      if (t.rfind("auto-A1", 0) == 0) {
        const std::string why = a1_infeasibility(parse_candidate_spec(t).list("b"));
        if (!why.empty()) throw usage_error("auto-A1 infeasible: " + why);
      } else if (t != "identity") {
        parse_matrix(t);
      }
      break;
    }
    case KeyType::matrix: parse_columns(v); break;
    case KeyType::data:
      parse_data(v);
      break;
    case KeyType::intervals: parse_intervals(v); break;
    case KeyType::complexes: parse_complexes(v); break;
  }
}

}  // namespace detail

/// Parses and validates a config. Throws config_error with the position of
/// the offending line and token.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  RunConfig* cur = nullptr;
  std::set<std::string> names;
  std::vector<std::pair<int, int>> kind_pos;  // position of each run's header
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const int col0 = static_cast<int>(first) + 1;
    const std::string body = trim(line);
    if (body.front() == '[') {
      if (body.back() != ']') throw config_error(lineno, col0, "section header must end with ']'");
      const std::string name = trim(body.substr(1, body.size() - 2));
      if (name.empty()) throw config_error(lineno, col0 + 1, "empty run name");
      if (!names.insert(name).second) throw config_error(lineno, col0 + 1, "duplicate run '" + name + "'");
      cfg.runs.push_back(RunConfig{name, "", "", lineno, {}});
      cur = &cfg.runs.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw config_error(lineno, col0, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw config_error(lineno, col0, "missing key before '='");
    const auto vstart = line.find_first_not_of(" \t", eq + 1);
    const int vcol = vstart == std::string::npos ? static_cast<int>(eq) + 2 : static_cast<int>(vstart) + 1;
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw config_error(lineno, vcol, "missing value for '" + key + "'");
    try {
      if (!cur) {
        if (key == "experiment") cfg.experiment = value;
        else if (key == "tol") cfg.tol = parse_number(value, key);
        else if (key == "grid") cfg.grid = static_cast<int>(parse_number(value, key));
        else if (key == "order") cfg.order = static_cast<int>(parse_number(value, key));
        else if (key == "seed") cfg.seed = static_cast<unsigned long>(parse_number(value, key));
        else throw config_error(lineno, col0, "unknown top-level key '" + key + "'");
        continue;
      }
      if (cur->values.count(key)) throw config_error(lineno, col0, "duplicate key '" + key + "'");
      cur->values[key] = {value, lineno, vcol, col0};
      if (key == "kind") cur->kind = value;
      if (key == "check") cur->check = value;
    } catch (const config_error&) {
      throw;
    } catch (const std::exception& e) {
      throw config_error(lineno, vcol, e.what());
    }
  }
  if (!(cfg.tol > 0)) throw config_error(1, 1, "tol must be positive");
  if (cfg.grid < 2) throw config_error(1, 1, "grid must be at least 2");

  const auto& schema = detail::run_schema();
  for (const auto& run : cfg.runs) {
    auto kit = schema.find(run.kind);
    if (kit == schema.end()) {
      const int l = run.has("kind") ? run.values.at("kind").line : run.line;
      const int c = run.has("kind") ? run.values.at("kind").column : 1;
      throw config_error(l, c, "run '" + run.name + "': unknown or missing kind '" + run.kind + "'");
    }
    auto cit = kit->second.find(run.check);
    if (cit == kit->second.end()) {
      const int l = run.has("check") ? run.values.at("check").line : run.line;
      const int c = run.has("check") ? run.values.at("check").column : 1;
      throw config_error(l, c, "run '" + run.name + "': unknown or missing check '" + run.check + "' for " +
                                    run.kind);
    }
    for (const auto& [key, val] : run.values) {
      const auto& common = detail::common_keys();
      detail::KeyType type;
      if (auto it = common.find(key); it != common.end()) {
        type = it->second;
      } else if (auto it2 = cit->second.find(key); it2 != cit->second.end()) {
        type = it2->second;
      } else {
        throw config_error(val.line, val.key_column, "run '" + run.name + "': unknown key '" + key + "'");
      }
      try {
        detail::validate_value(type, key, val.text);
      } catch (const std::exception& e) {
        throw config_error(val.line, val.column, e.what());
      }
    }
  }
  return cfg;
}

}  // namespace bellman
