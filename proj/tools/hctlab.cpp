#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "hct/io.hpp"

using namespace hct;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> field;
};

void print_checks(const std::string& title, const std::vector<Check>& checks) {
  std::printf("%s\n", title.c_str());
  for (const Check& c : checks)
    std::printf("  %-4s %-44s %.6g %s %.6g\n", c.pass() ? "PASS" : "FAIL", c.name.c_str(), c.value,
                c.above ? ">" : "<", c.limit);
}

ScenarioConfig load(const std::string& path, const Overrides& o) {
  ScenarioConfig cfg = load_config(path);
  if (o.seed) set_seed(cfg, *o.seed);
  if (o.out) cfg.out = *o.out;
  if (o.field) set_field(cfg, *o.field == "on");
  cfg.validate();
  return cfg;
}

int sweep(const ScenarioConfig& cfg) {
  const LatticeReport r = run_lattice(cfg);
  std::printf("%8s %12s %12s\n", "margin", "|K'/K-1|", "|Kc/K|");
  for (const SweepRow& s : r.sweep) std::printf("%8.3g %12.6g %12.6g\n", s.margin, s.deviation, s.complement);
  fs::create_directories(fs::path(cfg.out) / "reports");
  write_json(fs::path(cfg.out) / "reports" / "margin_sweep.json", lattice_json(r));
  print_checks(cfg.name, r.checks);
  return all_pass(r.checks) ? 0 : 1;
}

int run(const ScenarioConfig& cfg) {
  if (cfg.kind == ScenarioKind::Lattice) return sweep(cfg);
  ScenarioResult r = run_scenario(cfg);
  const fs::path dir(cfg.out);
  fs::create_directories(dir / "reports");
  std::vector<Check> extra;

  if (cfg.kind == ScenarioKind::TwoSlit) {
    ScenarioConfig other = cfg;
    set_field(other, !cfg.field);
    other.bohm_N = 0;
    ScenarioResult o = run_scenario(other);
    write_run(o, dir / (other.field ? "field_on" : "field_off"));
    for (const Check& c : o.checks) extra.push_back({"companion " + c.name, c.value, c.limit, c.above});
    const ScenarioResult& on = cfg.field ? r : o;
    const ScenarioResult& off = cfg.field ? o : r;
    const IAReport ia = ia_analysis(on, off, cfg.detector.velocity_bins, cfg.bootstrap);
    write_json(dir / "reports" / "ia.json", ia_json(ia));
    extra.push_back({"IA weighted on/off distance", ia.tv_weighted, 0.1, true});
    extra.push_back({"IA distance over noise floor", ia.tv_weighted - ia.noise_floor, 0.0, true});
    extra.push_back({"IA unconditional distance", ia.tv_unconditional, 1e-15});
  }
  if (cfg.kind == ScenarioKind::Measurement) {
    const std::vector<ChainRow> chains = chain_report(cfg, r.q);
    write_json(dir / "reports" / "chains.json", chains_json(chains));
    double worst = 0.0;
    for (const ChainRow& c : chains) worst = std::max(worst, c.value);
    extra.push_back({"chain projection", worst, 4.0 * cfg.disjoint.eps_leak});
    if (cfg.alt_proposal) {
      const WeightedEnsemble alt = classical_ensemble(cfg, r.q, *cfg.alt_proposal);
      const auto born = branch_born_report(alt, r.q.tree, branch_membership(alt, r.q.tree));
      write_json(dir / "reports" / "branch_born_alt.json", born_json(born));
      extra.push_back({"proposal robustness", born_table_difference(r.born, born), 0.02});
    }
  }
  r.checks.insert(r.checks.end(), extra.begin(), extra.end());
  write_run(r, dir);
  print_checks(cfg.name + " -> " + dir.string(), r.checks);
  return r.passed() ? 0 : 1;
}

int calibrate(const std::string& name, const std::optional<std::string>& out) {
  std::vector<std::string> names = name == "all" ? calibration_names() : std::vector<std::string>{name};
  json j = json::object();
  bool ok = true;
  for (const std::string& n : names) {
    const CalibrationResult c = run_calibration(n);
    print_checks(n, c.checks);
    j[n] = checks_json(c.checks);
    ok = ok && c.passed();
  }
  if (out) {
    fs::create_directories(fs::path(*out) / "reports");
    write_json(fs::path(*out) / "reports" / "calibration.json", j);
  }
  return ok ? 0 : 1;
}

int report(const std::string& dir) {
  const fs::path rep = fs::path(dir) / "reports";
  const json s = read_json(rep / "summary.json");
  std::printf("%s (%s) seed %llu, %lld trajectories, %lld records\n", s.at("name").get<std::string>().c_str(),
              s.at("kind").get<std::string>().c_str(), s.at("seed").get<unsigned long long>(),
              s.at("trajectories").get<long long>(), s.at("records").get<long long>());
  bool ok = true;
  for (const json& c : s.at("checks")) {
    std::printf("  %-4s %-44s %.6g\n", c.at("pass").get<bool>() ? "PASS" : "FAIL",
                c.at("name").get<std::string>().c_str(), c.at("value").get<double>());
    ok = ok && c.at("pass").get<bool>();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branch tree, trajectory ensemble and path-sum laboratory"};
  app.require_subcommand(1);
  Overrides o;
  int threads = 0;
  std::string field;
  app.add_option("--seed", o.seed, "master seed override");
  app.add_option("--out", o.out, "run directory override");
  app.add_option("--threads", threads, "OpenMP thread count")->check(CLI::NonNegativeNumber);
  app.add_option("--field", field, "field switch override")->check(CLI::IsMember({"on", "off"}));

  std::string target;
  auto* c_run = app.add_subcommand("run", "run a scenario config");
  c_run->add_option("config", target)->required();
  auto* c_cal = app.add_subcommand("calibrate", "run a named calibration or all");
  c_cal->add_option("name", target)->required();
  auto* c_rep = app.add_subcommand("report", "summarise a run directory");
  c_rep->add_option("run-dir", target)->required();
  auto* c_tree = app.add_subcommand("tree", "print the branch tree of a run directory");
  c_tree->add_option("run-dir", target)->required();
  auto* c_sweep = app.add_subcommand("sweep-margin", "margin sweep for a lattice config");
  c_sweep->add_option("config", target)->required();
  for (auto* sub : {c_run, c_cal, c_rep, c_tree, c_sweep}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  if (!field.empty()) o.field = field;
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*c_run) return run(load(target, o));
    if (*c_cal) return calibrate(target, o.out);
    if (*c_rep) return report(target);
    if (*c_tree) {
      std::cout << tree_outline(read_json(fs::path(target) / "tree.json"));
      return 0;
    }
    if (*c_sweep) {
      const ScenarioConfig cfg = load(target, o);
      if (cfg.kind != ScenarioKind::Lattice) throw ArgumentError("sweep-margin needs a lattice config");
      return sweep(cfg);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
