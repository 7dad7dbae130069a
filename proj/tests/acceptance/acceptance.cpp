// One PASS/FAIL line per acceptance criterion. Thresholds and runtime
// budgets are checked here directly against the library, independently of
// the bundled suite (which AC12 runs as a whole).

#include <cstdio>
#include <functional>
#include <sstream>

#include "bellman/paper_core_config.hpp"
#include "bellman/suite.hpp"

using namespace bellman;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Matrix correlated(double p) {
  Matrix a(2, 2);
  a << 1, p, 0, std::sqrt(1 - p * p);
  return a;
}

void ac1(Outcome& o) {
  double worst_res = 0, worst_eig = -1;
  for (double p : {0.1, 0.5, 0.9}) {
    const auto rep = check_first_type(borell_B(p), ColumnSystem(correlated(p)), SymMatrix::identity(2),
                                      GridSpec::cube(2, 0.05, 0.95, 21), 1e-6);
    worst_res = std::max(worst_res, rep.max_residual);
    worst_eig = std::max(worst_eig, rep.extras.at("worst_eigenvalue"));
    o.require(rep.passed(), "saturation at p=" + std::to_string(p));
  }
  o.require(worst_res <= 1e-6, "relative residual <= 1e-6");
  o.require(worst_eig <= 1e-8, "max eigenvalue <= 1e-8");
  o.detail << "residual=" << worst_res << " max_eig=" << worst_eig;
}

void ac2(Outcome& o) {
  const double inf = std::numeric_limits<double>::infinity();
  const double value = borell_orthant(0.5, 0.5, 0.5);
  const auto q = borell_stability_verify(0.5, IntervalSet::of({{-inf, 0}}), IntervalSet::of({{-inf, 0}}));
  const double oracle = q.extras.at("lhs");
  // Second oracle: tensor Gauss-Legendre over the bivariate density on a
  // truncated quadrant, independent of the conditioning formula.
  const double p = 0.5, s = std::sqrt(1 - p * p);
  const auto rule = composite_legendre(-12, 0, 48, 16);
  double direct = 0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double x = rule.nodes[i], y = rule.nodes[j];
      const double dens = std::exp(-(x * x - 2 * p * x * y + y * y) / (2 * s * s)) / (2 * M_PI * s);
      direct += rule.weights[i] * rule.weights[j] * dens;
    }
  }
  const double closed = 0.25 + 1.0 / 12;
  o.require(std::abs(oracle - closed) <= 1e-8, "conditioning oracle confirms 1/4 + 1/12");
  o.require(std::abs(direct - closed) <= 1e-8, "2-D quadrature confirms 1/4 + 1/12");
  o.require(std::abs(value - oracle) <= 1e-8, "B(1/2,1/2) matches the oracle");
  o.detail << "B=" << format_double(value) << " oracle=" << format_double(oracle)
           << " quad2d=" << format_double(direct);
}

void ac3(Outcome& o) {
  const auto& rule = gauss_hermite(128);
  double worst = 0, min_inflated = std::numeric_limits<double>::infinity();
  for (double t : {0.2, 0.5}) {
    const double big_p = 2, big_q = 1 + std::exp(2 * t) * (big_p - 1);
    for (double c : {0.5, 1.0, 2.0}) {
      const auto rep = hypercontractivity_verify(big_p, big_q, t, [c](double x) { return std::exp(c * x); }, rule);
      worst = std::max(worst, std::abs(rep.extras.at("ratio") - 1));
    }
    const double inflated = 1 + 1.5 * (big_q - 1);
    const auto bad = hypercontractivity_verify(big_p, inflated, t, [](double x) { return std::exp(x); }, rule);
    min_inflated = std::min(min_inflated, bad.extras.at("ratio"));
  }
  o.require(worst <= 1e-6, "boundary ratio within 1e-6");
  o.require(min_inflated > 1 + 1e-4, "inflated Q exceeds 1 + 1e-4");
  o.detail << "boundary |ratio-1|=" << worst << " inflated ratio=" << min_inflated;
}

void ac4(Outcome& o) {
  const auto cg = construct_C_for_b({0.6, 0.6});
  const auto ce = construct_C_for_b({0.5, 0.5});
  o.require(cg.c.has_value() && ce.c.has_value(), "C constructed");
  if (!o.ok) return;
  const auto g = reduced_H_condition(phi_composition_H({0.6, 0.6}, std_normal()), Vector::Constant(2, 0.6), *cg.c,
                                     GridSpec::cube(2, 0.05, 0.95, 21), 1e-8, ReducedMode::equality);
  const auto e = reduced_H_condition(phi_composition_H({0.5, 0.5}, ProfileFunction::exponential()),
                                     Vector::Constant(2, 0.5), *ce.c, GridSpec::cube(2, 0.05, 3.0, 21), 1e-8,
                                     ReducedMode::equality);
  o.require(g.max_residual <= 1e-8, "Gaussian profile residual");
  o.require(e.max_residual <= 1e-8, "exp profile residual");
  o.detail << "gaussian=" << g.max_residual << " exp=" << e.max_residual;
}

void ac5(Outcome& o) {
  const BumpDatum u{0.05, 0.8, 0.0, 1.0};
  const auto inst = ehrhard_hill_instance({0.6, 0.6}, u, u);
  const auto rep = hill_evolution(inst.b, inst.sys, inst.c, inst.tests, HillOptions{1.0, 11, 4.0, 41, 1e-6});
  o.require(rep.extras.at("min_V") >= -1e-6, "min V >= -1e-6");
  o.detail << "min_V=" << rep.extras.at("min_V") << " eps_h=" << inst.eps_h;
}

void ac6(Outcome& o) {
  std::vector<double> times;
  for (int i = 0; i < 20; ++i) times.push_back(i == 0 ? 0.0 : 20.0 * std::pow(2.0, i - 19));
  TestFunctionSet t;
  t.tag = Smoothness::mollified_indicator;
  const double inf = std::numeric_limits<double>::infinity();
  t.u = {IndicatorDatum{{{-inf, 0.3}}, 0.5, 0.02, 0.96}, IndicatorDatum{{{-inf, -0.2}}, 0.5, 0.02, 0.96}};
  const auto r = energy_monotonicity(borell_B(0.5), t, ColumnSystem(correlated(0.5)), SymMatrix::identity(2), times,
                                     Measure::gaussian);
  o.require(r.report.passed() && r.report.tol <= 1e-7, "nondecreasing within 1e-7");
  o.require(r.report.extras.at("limit_gap") <= 1e-8, "E(20) within 1e-8 of the right side");
  o.detail << "max_decrease=" << r.report.max_residual << " limit_gap=" << r.report.extras.at("limit_gap");
}

void ac7(Outcome& o) {
  const double p = 0.5, a = 1 + std::sqrt(0.5 * p * p);
  const auto w = gmc_converse_search(power_product(a, a), ColumnSystem(correlated(p)), SymMatrix::identity(2));
  o.require(w.found && w.delta < -1e-6, "witness with delta < -1e-6");
  o.detail << "delta=" << w.delta << " tried=" << w.tried;
}

void ac8(Outcome& o) {
  const auto cfg = parse_config("[k]\nkind = check-pde\ncheck = kernel-algebra\ninstances = 100\ntol = 1e-10\n");
  const auto res = run_one(cfg.runs[0], cfg);
  const auto& rep = res.checks.at(0);
  o.require(res.error.empty(), "no error");
  o.require(rep.extras.at("idempotence") <= 1e-10, "P^2 = P");
  o.require(rep.extras.at("annihilation") <= 1e-10, "ADP = 0");
  o.require(rep.extras.at("sherman_morrison") <= 1e-10, "Sherman-Morrison");
  o.detail << "idem=" << rep.extras.at("idempotence") << " annih=" << rep.extras.at("annihilation")
           << " sm=" << rep.extras.at("sherman_morrison");
}

void ac9(Outcome& o) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Complex> zs;
  while (zs.size() < 200) {
    const Complex z(u(rng), u(rng));
    if (std::abs(z) <= 1) zs.push_back(z);
  }
  double worst = 0;
  for (const auto& coeffs : {std::vector<Complex>{1.0}, std::vector<Complex>{0.0, Complex(0, 1)}}) {
    const DbarSolution sol(coeffs, 30);
    for (const auto& z : zs) worst = std::max(worst, dbar_residual(sol, z));
  }
  std::uniform_real_distribution<double> mag(1.01, 20.0);
  double compat = 0;
  for (int i = 0; i < 50; ++i) compat = std::max(compat, hodograph_maps((i % 2 ? 1 : -1) * mag(rng)).compatibility);
  o.require(worst <= 1e-5, "dbar residual <= 1e-5");
  o.require(compat <= 1e-12, "compatibility <= 1e-12");
  o.detail << "residual=" << worst << " compat=" << compat;
}

void ac10(Outcome& o) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto half = gaussian_isoperimetry_check(IntervalSet::of({{-inf, 0.3}}), {0, 0.5, 1, 2}, 1e-9);
  const auto iv = gaussian_isoperimetry_check(IntervalSet::of({{-1, 1}}), {0.5}, 1e-9);
  o.require(half.passed() && std::abs(half.extras.at("min_gap")) <= 1e-9, "half-line equality");
  o.require(iv.extras.at("min_gap") > 1e-4, "interval strict");
  double bm = 0;
  for (double l : {0.2, 0.5, 0.8}) {
    const auto rep = brunn_minkowski_check(l, {0, 1}, {2, 6}, 1e-3);
    o.require(rep.passed(), "Brunn-Minkowski lambda=" + std::to_string(l));
    bm = std::max(bm, rep.max_residual);
  }
  o.detail << "halfline_gap=" << half.extras.at("min_gap") << " interval_gap=" << iv.extras.at("min_gap")
           << " bm_deficit=" << bm;
}

void ac11(Outcome& o) {
  double spec = 0;
  for (int n : {2, 3}) {
    const auto rep = tensorization_check(borell_core(0.5, 0.3, 0.7), n);
    spec = std::max(spec, rep.max_residual);
  }
  o.require(spec <= 1e-10, "Kronecker spectrum within 1e-10");
  Gpde1Options opt;
  opt.grid = GridSpec::cube(2, 0.2, 2.0, 11);
  struct Case {
    double a, p;
    int m;
    std::vector<BlockDatum> u;
  };
  const std::vector<BlockDatum> bumps{block_bump(1, 0.5, 0.3, 1.0), block_bump(1, -0.4, -0.2, 0.7)};
  const std::vector<BlockDatum> consts{block_constant(1), block_constant(1)};
  const std::vector<Case> cases{{3, 0.6, 1, bumps}, {3, 0.6, 2, bumps}, {1.2, 0.9, 1, consts},
                                {1.2, 0.9, 2, consts}, {1.5, 0.9, 2, consts}};
  int agree = 0;
  for (const auto& c : cases) {
    const auto rep = gpde1_equivalence(power_product(c.a, c.a), tensorized_pair(c.p, c.m),
                                       SymMatrix::identity(2 * c.m), c.u, opt);
    if (rep.extras.at("consistent") == 1.0) ++agree;
  }
  o.require(agree == static_cast<int>(cases.size()), "gpde1 three-way agreement");
  o.detail << "spectrum=" << spec << " gpde1 agree=" << agree << "/" << cases.size();
}

void ac12(Outcome& o) {
  const auto rep = run_suite(parse_config(kPaperCoreConfig));
  std::size_t checks = 0, passed = 0;
  for (const auto& r : rep.runs) {
    for (const auto& c : r.checks) {
      ++checks;
      if (c.passed()) ++passed;
      else o.detail << " [" << r.name << "/" << c.name << " " << to_string(c.verdict) << "]";
    }
  }
  o.require(rep.verdict == Verdict::pass, "suite verdict pass");
  o.detail << "runs=" << rep.runs.size() << " checks=" << passed << "/" << checks;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    double budget_ms;
    std::function<void(Outcome&)> fn;
  };
  const std::vector<Criterion> all{
      {"AC1", 5e3, ac1},   {"AC2", 2e3, ac2},   {"AC3", 2e3, ac3},  {"AC4", 3e3, ac4},
      {"AC5", 60e3, ac5},  {"AC6", 30e3, ac6},  {"AC7", 30e3, ac7}, {"AC8", 1e3, ac8},
      {"AC9", 5e3, ac9},   {"AC10", 2e3, ac10}, {"AC11", 20e3, ac11}, {"AC12", 300e3, ac12},
  };
  int failed = 0;
  for (const auto& c : all) {
    Outcome o;
    Stopwatch sw;
    try {
      c.fn(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail << " [error: " << e.what() << "]";
    }
    const double ms = sw.ms();
    o.require(ms < c.budget_ms, "runtime budget " + std::to_string(static_cast<long>(c.budget_ms)) + " ms");
    if (!o.ok) ++failed;
    std::printf("%s %s (%.0f ms) %s\n", c.id, o.ok ? "PASS" : "FAIL", ms, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
