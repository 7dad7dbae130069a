#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "bellman/paper_core_config.hpp"
#include "bellman/suite.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string format = "all";
  std::optional<double> tol;
  std::optional<int> grid;
  std::optional<unsigned long> seed;
  bool quiet = false;
};

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw bellman::usage_error("cannot read config " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Flags override both the top-level defaults and any per-run value.
void apply_overrides(bellman::ExperimentConfig& cfg, const Common& c) {
  auto drop = [&](const char* key) {
    for (auto& r : cfg.runs) r.values.erase(key);
  };
  if (c.tol) {
    if (!(*c.tol > 0)) throw bellman::usage_error("--tol must be positive");
    cfg.tol = *c.tol;
    drop("tol");
  }
  if (c.grid) {
    if (*c.grid < 2) throw bellman::usage_error("--grid must be at least 2");
    cfg.grid = *c.grid;
    drop("grid");
  }
  if (c.seed) {
    cfg.seed = *c.seed;
    drop("seed");
  }
}

int run(const Common& c, const std::string& kind, bool general_rank_only) {
  bellman::ExperimentConfig cfg = bellman::parse_config(c.config.empty() ? bellman::kPaperCoreConfig : read_text(c.config));
  apply_overrides(cfg, c);
  if (!kind.empty()) {
    std::vector<bellman::RunConfig> keep;
    for (auto& r : cfg.runs) {
      if (r.kind != kind) continue;
      if (general_rank_only && r.check != "general-rank") continue;
      keep.push_back(std::move(r));
    }
    cfg.runs = std::move(keep);
  }
  const bellman::RunReport rep = bellman::run_suite(cfg);
  if (!c.quiet) {
    for (const auto& r : rep.runs) {
      for (const auto& ch : r.checks) {
        std::cout << (ch.passed() ? "PASS " : ch.verdict == bellman::Verdict::fail ? "FAIL " : "INCONCLUSIVE ")
                  << r.name << "/" << ch.name << "  max_residual=" << bellman::format_double(ch.max_residual)
                  << "  tol=" << bellman::format_double(ch.tol) << "\n";
        if (!r.error.empty()) std::cout << "    " << r.error << "\n";
      }
    }
    std::cout << "suite " << cfg.experiment << ": " << bellman::to_string(rep.verdict) << " (" << rep.runs.size()
              << " runs, " << static_cast<long>(rep.runtime_ms) << " ms)\n";
  }
  if (!c.out.empty()) {
    for (const auto& p : bellman::emit(rep, cfg, c.out, c.format)) {
      if (!c.quiet) std::cout << "wrote " << p.string() << "\n";
    }
  }
  return rep.verdict == bellman::Verdict::pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bellman function checks driven by experiment configs"};
  app.set_version_flag("--version", std::string(bellman::kToolVersion));
  app.require_subcommand(1);
  Common common;
  bool general_rank = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "config file (default: the bundled paper-core suite)");
    sub->add_option("--out", common.out, "directory for report.json and CSV files");
    sub->add_option("--format", common.format, "json, csv or all")->check(CLI::IsMember({"json", "csv", "all"}));
    sub->add_option("--tol", common.tol, "tolerance for every run");
    sub->add_option("--grid", common.grid, "grid points per axis for every run");
    sub->add_option("--seed", common.seed, "seed for every run");
    sub->add_flag("-q,--quiet", common.quiet, "no per-check output");
  };

  struct Sub {
    const char* name;
    const char* kind;
    const char* help;
  };
  const Sub subs[] = {
      {"check-pde", "check-pde", "pointwise PDE conditions and matrix algebra"},
      {"flow", "flow", "heat-flow energy curves and hill evolution"},
      {"verify", "verify", "integral inequalities"},
      {"dbar", "dbar", "complex reduction and Monge-Ampere residuals"},
      {"region", "region", "parameter-region scans"},
      {"report", "", "every run in the config"},
  };
  std::string chosen_kind;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    if (std::string(s.name) == "check-pde") {
      sub->add_flag("--general-rank", general_rank, "only the block (general rank) runs");
    }
    const std::string kind = s.kind;
    sub->callback([&chosen_kind, kind] { chosen_kind = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return run(common, chosen_kind, general_rank);
  } catch (const bellman::usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
