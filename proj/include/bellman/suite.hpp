#pragma once

// Runs parsed experiment configs and serializes the results. Each [run]
// dispatches to one checker family; errors are recorded per run and the
// suite continues.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bellman/config.hpp"
#include "bellman/dbar.hpp"
#include "bellman/general_rank.hpp"
#include "bellman/verifiers.hpp"

#ifndef BELLMAN_VERSION
#define BELLMAN_VERSION "0.0.0"
#endif

namespace bellman {

inline constexpr const char* kToolVersion = BELLMAN_VERSION;

/// Plot data: one row per grid point or sample.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  bool empty() const { return columns.empty(); }
};

struct RunResult {
  std::string name, kind, check;
  std::vector<CheckReport> checks;
  Table table;
  std::string error;
};

struct RunReport {
  std::string experiment;
  std::string version = kToolVersion;
  nlohmann::json params;
  std::vector<RunResult> runs;
  Verdict verdict = Verdict::pass;
  double runtime_ms = 0;
  nlohmann::json metadata;  // timestamps, host, per-check wall times
};

/// 17 significant digits.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

namespace detail {

// Parameter values inside check names.
inline std::string short_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline int grid_count(const RunConfig& r, const ExperimentConfig& cfg) {
  return static_cast<int>(r.number_or("grid", cfg.grid));
}

inline double run_tol(const RunConfig& r, const ExperimentConfig& cfg) { return r.number_or("tol", cfg.tol); }

inline unsigned long run_seed(const RunConfig& r, const ExperimentConfig& cfg) {
  return static_cast<unsigned long>(r.number_or("seed", static_cast<double>(cfg.seed)));
}

inline std::vector<BlockDatum> parse_block_data(const std::string& text) {
  std::vector<BlockDatum> out;
  for (const auto& part : split(text, ';')) {
    const CandidateSpec s = parse_candidate_spec(part);
    if (s.name == "bump") {
      out.push_back(block_bump(s.scalar_or("base", 1), s.scalar_or("amp", 1), s.scalar_or("center", 0),
                               s.scalar_or("width", 1)));
    } else if (s.name == "const") {
      out.push_back(block_constant(s.scalar("v")));
    } else {
      throw usage_error("general-rank data must be bump or const, got '" + s.name + "'");
    }
  }
  return out;
}

inline CheckReport single_report(const std::string& name, double residual, double tol) {
  CheckReport rep;
  rep.name = name;
  rep.grid_size = 1;
  rep.tol = tol;
  rep.max_residual = rep.mean_residual = residual;
  rep.decide();
  return rep;
}

inline void run_check_pde(const RunConfig& r, const ExperimentConfig& cfg, RunResult& out) {
  const double tol = run_tol(r, cfg);
  const int count = grid_count(r, cfg);
  if (r.check == "first-type" || r.check == "second-type") {
    const auto b = make_candidate(r.text("candidate"));
    const ColumnSystem sys(parse_columns(r.text("columns")));
    const SymMatrix c = parse_c(r.text_or("C", "identity"), sys.k());
    const GridSpec g = GridSpec::cube(b.arity, r.number_or("lo", 0.05), r.number_or("hi", 0.95), count);
    out.checks.push_back(r.check == "first-type" ? check_first_type(b, sys, c, g, tol)
                                                 : check_second_type(b, sys, c, g, tol));
  } else if (r.check == "reduced-H") {
    const auto h = make_surface(r.text("surface"));
    const auto an = r.numbers("an");
    const Vector av = Eigen::Map<const Vector>(an.data(), static_cast<Eigen::Index>(an.size()));
    const SymMatrix c = parse_c(r.text_or("C", "identity"), h.arity);
    const std::string mode = r.text_or("mode", "inequality");
    if (mode != "inequality" && mode != "equality") throw usage_error("mode must be inequality or equality");
    const GridSpec g = GridSpec::cube(h.arity, r.number_or("lo", 0.05), r.number_or("hi", 0.95), count);
    out.checks.push_back(reduced_H_condition(h, av, c, g, tol,
                                             mode == "equality" ? ReducedMode::equality : ReducedMode::inequality));
  } else if (r.check == "general-rank") {
    const auto b = make_candidate(r.text("candidate"));
    const int m = static_cast<int>(r.number_or("width", 1));
    const BlockSystem bs = tensorized_pair(r.number("p"), m);
    Gpde1Options opt;
    opt.tol = tol;
    opt.order = static_cast<int>(r.number_or("order", 20));
    opt.grid = GridSpec::cube(b.arity, r.number_or("lo", 0.2), r.number_or("hi", 2.0), std::min(count, 11));
    const auto data = parse_block_data(r.text_or("data", "const:v=1; const:v=1"));
    out.checks.push_back(gpde1_equivalence(b, bs, SymMatrix::identity(2 * m), data, opt));
  } else if (r.check == "kernel-algebra") {
    std::mt19937_64 rng(run_seed(r, cfg));
    std::normal_distribution<double> g(0, 1);
    std::uniform_real_distribution<double> mag(0.3, 2.0);
    auto rnd = [&](int rows, int cols) {
      Matrix m(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
      return m;
    };
    const int instances = static_cast<int>(r.number_or("instances", 100));
    double idem = 0, annih = 0, sm = 0;
    for (int t = 0; t < instances; ++t) {
      const int n = 2 + t % 4;
      const int k = 1 + t % (n - 1 > 0 ? n - 1 : 1);
      const ColumnSystem sys(rnd(k, n));
      Vector grad(n), d(n);
      for (int i = 0; i < n; ++i) {
        grad(i) = (g(rng) > 0 ? 1 : -1) * mag(rng);
        d(i) = (g(rng) > 0 ? 1 : -1) * mag(rng);
      }
      const Projection p = kernel_projection(sys, grad);
      idem = std::max(idem, (p.entries * p.entries - p.entries).cwiseAbs().maxCoeff());
      annih = std::max(annih, (scaled_columns(sys, grad) * p.entries).cwiseAbs().maxCoeff());
      const Vector a = rnd(n, 1).col(0);
      const double bn = 0.5 + (t % 7) * 0.3;
      const Matrix full = bn * bn * a * a.transpose() + Matrix(d.array().square().matrix().asDiagonal());
      const Matrix inv = full.inverse();
      sm = std::max(sm, (sherman_morrison(d, a, bn).matrix() - inv).cwiseAbs().maxCoeff() /
                            (1 + inv.cwiseAbs().maxCoeff()));
    }
    CheckReport rep = single_report("kernel_algebra", std::max({idem, annih, sm}), tol);
    rep.grid_size = static_cast<std::size_t>(instances);
    rep.extras = {{"idempotence", idem}, {"annihilation", annih}, {"sherman_morrison", sm}};
    out.checks.push_back(rep);
  } else if (r.check == "tensorization") {
    const SymMatrix core = borell_core(r.number("p"), r.number_or("u", 0.3), r.number_or("v", 0.7));
    for (double n : r.numbers_or("n", {2, 3})) {
      auto rep = tensorization_check(core, static_cast<int>(n), tol);
      rep.name += "(n=" + short_double(n) + ")";
      out.checks.push_back(rep);
    }
  }
}

inline void run_flow(const RunConfig& r, const ExperimentConfig& cfg, RunResult& out) {
  const double tol = run_tol(r, cfg);
  if (r.check == "energy") {
    const auto b = make_candidate(r.text("candidate"));
    const ColumnSystem sys(parse_columns(r.text("columns")));
    const SymMatrix c = parse_c(r.text_or("C", "identity"), sys.k());
    const auto tests = parse_data(r.text("data"));
    const int samples = static_cast<int>(r.number_or("samples", 20));
    const double t_max = r.number_or("t_max", 20);
    if (samples < 2) throw usage_error("energy: need at least two samples");
    // Geometric times ending at t_max, plus t = 0.
    std::vector<double> times;
    for (int i = 0; i < samples; ++i) times.push_back(i == 0 ? 0.0 : t_max * std::pow(2.0, i - (samples - 1)));
    const std::string mname = r.text_or("measure", "gaussian");
    if (mname != "gaussian" && mname != "lebesgue") throw usage_error("measure must be gaussian or lebesgue");
    const Measure measure = mname == "gaussian" ? Measure::gaussian : Measure::lebesgue;
    EnergyOptions opt;
    opt.tol = tol;
    if (r.has("order")) opt.order = static_cast<int>(r.number("order"));
    auto res = energy_monotonicity(b, tests, sys, c, times, measure, opt);
    if (r.has("limit_tol") && res.report.extras.count("limit_gap")) {
      const double lt = r.number("limit_tol");
      if (res.report.extras.at("limit_gap") > lt) {
        res.report.verdict = Verdict::fail;
        res.report.notes.push_back("curve end is farther than " + format_double(lt) + " from the limit");
      }
    }
    out.checks.push_back(res.report);
    out.table.columns = {"t", "E", "measure"};
    for (std::size_t i = 0; i < res.curve.times.size(); ++i) {
      out.table.rows.push_back({format_double(res.curve.times[i]), format_double(res.curve.values[i]), mname});
    }
  } else if (r.check == "hill") {
    const auto alpha = r.numbers("alpha");
    const auto data = parse_data(r.text_or("data", "bump:base=0.05,amp=0.8; bump:base=0.05,amp=0.8"));
    if (data.u.size() != 2) throw usage_error("hill: need two data");
    const auto inst = ehrhard_hill_instance(alpha, data.u[0], data.u[1]);
    HillOptions opt{r.number_or("T", 1.0), static_cast<int>(r.number_or("samples", 11)),
                    r.number_or("half_width", 4.0), static_cast<int>(r.number_or("space", 41)), tol};
    auto rep = hill_evolution(inst.b, inst.sys, inst.c, inst.tests, opt);
    rep.extras["eps_h"] = inst.eps_h;
    out.checks.push_back(rep);
  }
}

inline void run_verify(const RunConfig& r, const ExperimentConfig& cfg, RunResult& out) {
  const double tol = run_tol(r, cfg);
  const double inf = std::numeric_limits<double>::infinity();
  if (r.check == "orthant") {
    const double p = r.number("p"), u = r.number_or("u", 0.5), v = r.number_or("v", 0.5);
    const double value = borell_orthant(p, u, v);
    // Independent value: the conditioned 1-D integral over the two rays.
    const auto q = borell_stability_verify(p, IntervalSet::of({{-inf, normal_quantile(u)}}),
                                           IntervalSet::of({{-inf, normal_quantile(v)}}), tol);
    const double oracle = q.extras.at("lhs");
    double res = std::abs(value - oracle);
    if (r.has("expect")) res = std::max(res, std::abs(oracle - r.number("expect")));
    CheckReport rep = single_report("orthant", res, tol);
    rep.extras = {{"value", value}, {"oracle", oracle}};
    if (r.has("expect")) rep.extras["expect"] = r.number("expect");
    out.checks.push_back(rep);
  } else if (r.check == "hypercontractivity") {
    const double big_p = r.number_or("P", 2.0);
    const auto& rule = gauss_hermite(static_cast<int>(r.number_or("order", 128)));
    for (double t : r.numbers_or("t", {0.2, 0.5})) {
      const double big_q = 1 + std::exp(2 * t) * (big_p - 1);
      for (double c : r.numbers_or("c", {0.5, 1, 2})) {
        auto rep = hypercontractivity_verify(big_p, big_q, t, [c](double x) { return std::exp(c * x); }, rule, tol);
        rep.name = "hypercontractivity(t=" + short_double(t) + ",c=" + short_double(c) + ")";
        out.checks.push_back(rep);
      }
      if (r.has("inflate")) {
        const double q2 = 1 + r.number("inflate") * (big_q - 1);
        const auto bad = hypercontractivity_verify(big_p, q2, t, [](double x) { return std::exp(x); }, rule, tol);
        CheckReport rep = single_report("hypercontractivity_inflated(t=" + short_double(t) + ")",
                                        std::max(0.0, 1 + 1e-4 - bad.extras.at("ratio")), 0.0);
        rep.extras = {{"ratio", bad.extras.at("ratio")}, {"Q", q2}};
        rep.notes.push_back("pass means the ratio exceeds 1 + 1e-4 outside the region");
        out.checks.push_back(rep);
      }
    }
  } else if (r.check == "gmc") {
    const auto b = make_candidate(r.text("candidate"));
    const ColumnSystem sys(parse_columns(r.text("columns")));
    GmcOptions opt;
    opt.tol = tol;
    out.checks.push_back(verify_gmc(b, sys, parse_c(r.text_or("C", "identity"), sys.k()), parse_data(r.text("data")), opt));
  } else if (r.check == "converse") {
    const auto b = make_candidate(r.text("candidate"));
    const ColumnSystem sys(parse_columns(r.text("columns")));
    const auto w = gmc_converse_search(b, sys, parse_c(r.text_or("C", "identity"), sys.k()), BumpFamily{},
                                       r.number_or("threshold", 1e-6));
    out.checks.push_back(w.report);
  } else if (r.check == "borell-stability") {
    out.checks.push_back(borell_stability_verify(r.number("p"), IntervalSet::of(parse_intervals(r.text("A"))),
                                                 IntervalSet::of(parse_intervals(r.text("B"))), tol));
  } else if (r.check == "isoperimetry") {
    auto rep = gaussian_isoperimetry_check(IntervalSet::of(parse_intervals(r.text("A"))),
                                           r.numbers_or("t", {0, 0.5, 1, 2}), tol);
    if (r.has("strict") && !(rep.extras.at("min_gap") > r.number("strict"))) {
      rep.verdict = Verdict::fail;
      rep.notes.push_back("gap is not above the strictness margin");
    }
    out.checks.push_back(rep);
  } else if (r.check == "brunn-minkowski") {
    const auto u = parse_intervals(r.text("U")), v = parse_intervals(r.text("V"));
    if (u.size() != 1 || v.size() != 1) throw usage_error("brunn-minkowski: U and V must be single intervals");
    for (double l : r.numbers_or("lambda", {0.2, 0.5, 0.8})) {
      auto rep = brunn_minkowski_check(l, u[0], v[0]);
      rep.name += "(lambda=" + short_double(l) + ")";
      out.checks.push_back(rep);
    }
  } else if (r.check == "ehrhard-pl") {
    const auto data = parse_data(r.text("data"));
    out.checks.push_back(ehrhard_pl_verify(profile_by_name(r.text_or("profile", "gaussian")), r.numbers("b"), data.u, tol));
  }
}

inline void run_dbar(const RunConfig& r, const ExperimentConfig& cfg, RunResult& out) {
  const double tol = run_tol(r, cfg);
  if (r.check == "residual") {
    const auto coeffs = parse_complexes(r.text_or("coeffs", "1"));
    const int order = static_cast<int>(r.number_or("order", 30));
    const int points = static_cast<int>(r.number_or("points", 200));
    const double radius = r.number_or("radius", 1.0);
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
      std::vector<Complex> cs(j + 1, 0.0);
      cs[j] = coeffs[j];
      const DbarSolution sol(cs, order);
      std::mt19937_64 rng(run_seed(r, cfg) + j);
      std::uniform_real_distribution<double> u(-radius, radius);
      std::vector<Complex> zs;
      while (static_cast<int>(zs.size()) < points) {
        const Complex z(u(rng), u(rng));
        if (std::abs(z) <= radius) zs.push_back(z);
      }
      std::vector<double> res(zs.size());
      parallel_for(zs.size(), [&](std::size_t i) { res[i] = dbar_residual(sol, zs[i]); });
      CheckReport rep = single_report("dbar_residual(c" + std::to_string(j) + ")", 0, tol);
      rep.grid_size = zs.size();
      double sum = 0;
      for (std::size_t i = 0; i < zs.size(); ++i) {
        sum += res[i];
        if (i == 0 || res[i] > rep.max_residual) {
          rep.max_residual = res[i];
          rep.argmax = {zs[i].real(), zs[i].imag()};
        }
      }
      rep.mean_residual = sum / static_cast<double>(zs.size());
      rep.decide();
      out.checks.push_back(rep);
      if (out.table.empty()) out.table.columns = {"coefficient", "x", "y", "residual"};
      for (std::size_t i = 0; i < zs.size(); ++i) {
        out.table.rows.push_back(
            {std::to_string(j), format_double(zs[i].real()), format_double(zs[i].imag()), format_double(res[i])});
      }
    }
  } else if (r.check == "compatibility") {
    std::mt19937_64 rng(run_seed(r, cfg));
    std::uniform_real_distribution<double> mag(r.number_or("c_min", 1.01), r.number_or("c_max", 20.0));
    std::bernoulli_distribution sign(0.5);
    const int count = static_cast<int>(r.number_or("count", 50));
    double worst = 0, worst_a = 0, arg = 0;
    int negative = 0;
    for (int i = 0; i < count; ++i) {
      const double c = (sign(rng) ? 1 : -1) * mag(rng);
      const HodographMaps h = hodograph_maps(c);
      if (h.compatibility > worst || i == 0) {
        worst = h.compatibility;
        arg = c;
      }
      const Mat2 closed = hodograph_A_closed_form(h.t);
      worst_a = std::max(worst_a, (h.a - closed).cwiseAbs().maxCoeff() / (1 + closed.cwiseAbs().maxCoeff()));
      if (c < 0) ++negative;
    }
    CheckReport rep = single_report("hodograph_compatibility", std::max(worst, worst_a), tol);
    rep.grid_size = static_cast<std::size_t>(count);
    rep.argmax = {arg};
    rep.extras = {{"compatibility", worst}, {"A_closed_form", worst_a}, {"negative_t_runs", negative}};
    if (negative) rep.notes.push_back("t < 0 runs use the principal square root");
    out.checks.push_back(rep);
  } else if (r.check == "monge-ampere" || r.check == "hodograph") {
    const auto b = make_candidate(r.text("candidate"));
    const GridSpec g = GridSpec::cube(2, r.number_or("lo", 0.1), r.number_or("hi", 0.9), grid_count(r, cfg));
    const double c = r.number("c");
    out.checks.push_back(r.check == "monge-ampere" ? monge_ampere_residual(b, c, g, tol)
                                                   : hodograph_system_residual(b, c, g, tol));
  }
}

inline void run_region(const RunConfig& r, const ExperimentConfig& cfg, RunResult& out) {
  const double p = r.number("p");
  const double lo = r.number_or("lo", 1.0), hi = r.number_or("hi", 3.0);
  const int count = grid_count(r, cfg);
  const GridSpec g = GridSpec::cube(2, lo, hi, count);
  out.table.columns = {"a", "b", "p", "admissible"};
  std::size_t mismatches = 0, checked = 0;
  Vector one(2);
  one << 1, 1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vector ab = g.point(i);
    const bool adm = hyper_region(ab(0), ab(1), p);
    out.table.rows.push_back({format_double(ab(0)), format_double(ab(1)), format_double(p), adm ? "1" : "0"});
    if (std::abs((ab(0) - 1) * (ab(1) - 1) - p * p) < 1e-9 || ab(0) == 1 || ab(1) == 1) continue;
    // Independent side: NSD of the power-product core at (1, 1).
    const SymMatrix h = power_product(ab(0), ab(1)).hessian(one);
    Matrix core(2, 2);
    core << h(0, 0), p * h(0, 1), p * h(0, 1), h(1, 1);
    const bool nsd = is_nsd(SymMatrix(core), 1e-12).nsd;
    ++checked;
    if (nsd != adm) ++mismatches;
  }
  CheckReport rep = single_report("hyper_region", static_cast<double>(mismatches), 0.5);
  rep.grid_size = g.size();
  rep.extras = {{"checked", static_cast<double>(checked)}, {"mismatches", static_cast<double>(mismatches)}};
  out.checks.push_back(rep);
}

}  // namespace detail

inline RunResult run_one(const RunConfig& r, const ExperimentConfig& cfg) {
  RunResult out{r.name, r.kind, r.check, {}, {}, ""};
  try {
    if (r.kind == "check-pde") detail::run_check_pde(r, cfg, out);
    else if (r.kind == "flow") detail::run_flow(r, cfg, out);
    else if (r.kind == "verify") detail::run_verify(r, cfg, out);
    else if (r.kind == "dbar") detail::run_dbar(r, cfg, out);
    else if (r.kind == "region") detail::run_region(r, cfg, out);
    else throw usage_error("unknown kind '" + r.kind + "'");
  } catch (const std::exception& e) {
    out.error = e.what();
    out.checks.clear();
    CheckReport rep;
    rep.name = r.check;
    rep.verdict = Verdict::fail;
    rep.max_residual = rep.mean_residual = std::numeric_limits<double>::infinity();
    rep.notes.push_back(std::string("error: ") + e.what());
    out.checks.push_back(rep);
  }
  return out;
}

inline nlohmann::json config_echo(const ExperimentConfig& cfg) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : cfg.runs) {
    nlohmann::json vals = nlohmann::json::object();
    for (const auto& [k, v] : r.values) vals[k] = v.text;
    runs.push_back({{"name", r.name}, {"values", vals}});
  }
  return {{"tol", cfg.tol}, {"grid", cfg.grid}, {"order", cfg.order}, {"seed", cfg.seed}, {"runs", runs}};
}

/// Runs are executed in a pool of BELLMAN_SUITE_WORKERS workers (default 1);
/// assembly is in config order.
inline RunReport run_suite(const ExperimentConfig& cfg) {
  Stopwatch sw;
  RunReport rep;
  rep.experiment = cfg.experiment;
  rep.params = config_echo(cfg);
  rep.runs.resize(cfg.runs.size());
  std::size_t workers = 1;
  if (const char* env = std::getenv("BELLMAN_SUITE_WORKERS")) {
    try {
      workers = static_cast<std::size_t>(std::max(1L, std::stol(env)));
    } catch (...) {
    }
  }
  parallel_for(cfg.runs.size(), [&](std::size_t i) { rep.runs[i] = run_one(cfg.runs[i], cfg); }, workers);
  for (const auto& run : rep.runs) {
    for (const auto& c : run.checks) {
      if (!c.passed()) rep.verdict = Verdict::fail;
    }
  }
  rep.runtime_ms = sw.ms();
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  nlohmann::json wall = nlohmann::json::object();
  for (const auto& run : rep.runs) {
    for (const auto& c : run.checks) wall[run.name + "/" + c.name] = c.wall_ms;
  }
  const char* host = std::getenv("HOSTNAME");
  rep.metadata = {{"timestamp", ts.str()}, {"host", host ? host : "unknown"}, {"wall_ms", wall}};
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

// Non-finite values are written as the strings "inf", "-inf", "nan".
inline nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline double from_num(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw usage_error("report: bad number '" + s + "'");
}

}  // namespace detail

inline nlohmann::json check_to_json(const std::string& run, const CheckReport& c) {
  nlohmann::json argmax = nlohmann::json::array();
  for (double v : c.argmax) argmax.push_back(detail::num(v));
  nlohmann::json extras = nlohmann::json::object();
  for (const auto& [k, v] : c.extras) extras[k] = detail::num(v);
  return {{"run", run},
          {"name", c.name},
          {"grid", c.grid_size},
          {"max_residual", detail::num(c.max_residual)},
          {"mean_residual", detail::num(c.mean_residual)},
          {"argmax", argmax},
          {"verdict", to_string(c.verdict)},
          {"tol", detail::num(c.tol)},
          {"skipped", c.skipped},
          {"extras", extras},
          {"notes", c.notes}};
}

inline CheckReport check_from_json(const nlohmann::json& j) {
  CheckReport c;
  c.name = j.at("name").get<std::string>();
  c.grid_size = j.at("grid").get<std::size_t>();
  c.max_residual = detail::from_num(j.at("max_residual"));
  c.mean_residual = detail::from_num(j.at("mean_residual"));
  for (const auto& v : j.at("argmax")) c.argmax.push_back(detail::from_num(v));
  c.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  c.tol = detail::from_num(j.at("tol"));
  c.skipped = j.value("skipped", std::size_t{0});
  if (j.contains("extras")) {
    for (const auto& [k, v] : j.at("extras").items()) c.extras[k] = detail::from_num(v);
  }
  if (j.contains("notes")) c.notes = j.at("notes").get<std::vector<std::string>>();
  return c;
}

/// The deterministic part of the report (no timings, no metadata).
inline nlohmann::json report_body(const RunReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    for (const auto& c : run.checks) checks.push_back(check_to_json(run.name, c));
    nlohmann::json rj = {{"name", run.name}, {"kind", run.kind}, {"check", run.check}};
    if (!run.error.empty()) rj["error"] = run.error;
    runs.push_back(rj);
  }
  return {{"experiment", r.experiment}, {"version", r.version}, {"params", r.params},
          {"runs", runs},               {"checks", checks},     {"verdict", to_string(r.verdict)}};
}

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json j = report_body(r);
  j["runtime_ms"] = r.runtime_ms;
  j["metadata"] = r.metadata.is_null() ? nlohmann::json::object() : r.metadata;
  return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.version = j.at("version").get<std::string>();
  r.params = j.at("params");
  r.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  r.runtime_ms = j.at("runtime_ms").get<double>();
  r.metadata = j.value("metadata", nlohmann::json::object());
  for (const auto& rj : j.at("runs")) {
    RunResult run;
    run.name = rj.at("name").get<std::string>();
    run.kind = rj.at("kind").get<std::string>();
    run.check = rj.at("check").get<std::string>();
    run.error = rj.value("error", std::string());
    r.runs.push_back(run);
  }
  for (const auto& cj : j.at("checks")) {
    const std::string owner = cj.at("run").get<std::string>();
    auto it = std::find_if(r.runs.begin(), r.runs.end(), [&](const RunResult& x) { return x.name == owner; });
    if (it == r.runs.end()) throw usage_error("report: check refers to unknown run '" + owner + "'");
    it->checks.push_back(check_from_json(cj));
  }
  return r;
}

inline std::string dump_report(const RunReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline std::string table_csv(const Table& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

/// Summary CSV: one row per check.
inline std::string checks_csv(const RunReport& r) {
  Table t;
  t.columns = {"run", "check", "grid", "max_residual", "mean_residual", "verdict", "tol"};
  for (const auto& run : r.runs) {
    for (const auto& c : run.checks) {
      t.rows.push_back({run.name, c.name, std::to_string(c.grid_size), format_double(c.max_residual),
                        format_double(c.mean_residual), to_string(c.verdict), format_double(c.tol)});
    }
  }
  return table_csv(t);
}

/// Writes report.json, checks.csv and one <run>.csv per run with plot data.
/// The csv key of a run overrides its file name.
inline std::vector<std::filesystem::path> emit(const RunReport& r, const ExperimentConfig& cfg,
                                               const std::filesystem::path& dir, const std::string& format) {
  if (format != "json" && format != "csv" && format != "all") throw usage_error("format must be json, csv or all");
  std::vector<std::filesystem::path> written;
  if (format == "json" || format == "all") {
    write_file(dir / "report.json", dump_report(r));
    written.push_back(dir / "report.json");
  }
  if (format == "csv" || format == "all") {
    write_file(dir / "checks.csv", checks_csv(r));
    written.push_back(dir / "checks.csv");
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
      if (r.runs[i].table.empty()) continue;
      std::string name = r.runs[i].name + ".csv";
      if (i < cfg.runs.size() && cfg.runs[i].has("csv")) name = cfg.runs[i].text("csv");
      write_file(dir / name, table_csv(r.runs[i].table));
      written.push_back(dir / name);
    }
  }
  return written;
}

}  // namespace bellman
