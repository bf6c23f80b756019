#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hct/bohmian.hpp"
#include "hct/config.hpp"
#include "hct/pathint.hpp"

namespace hct {

// One named validation: pass iff value < limit (or value > limit when `above`).
struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool above = false;
  bool pass() const { return above ? value > limit : value < limit; }
};

bool all_pass(const std::vector<Check>& checks);

// Bins of width w centred on multiples of w along axis 0.
struct CoarseBins {
  double width = 0.0;
  Index of(double x) const { return Index(std::floor(x / width + 0.5)); }
};

struct QuantumRun {
  WaveFunction psi0, psiT;
  BranchTree tree;
  std::vector<double> norm_drift;  // |norm - 1| per record
  double max_edge = 0.0;           // largest edge mass over the record times
  std::map<Index, WaveFunction> snapshots;
  std::vector<std::map<Index, double>> coarse_born;  // per record: coarse bin -> mass
};

using RecordHook = std::function<void(Index, const WaveFunction&)>;

QuantumRun run_quantum(const ScenarioConfig& cfg, const RecordHook& on_record = {});

struct SigmaRow {
  int node = 0;
  double time = 0.0;
  double discrepancy = 0.0;
};

struct ScreenRow {
  int bin = 0;
  int leaf = -1;
  double x = 0.0;  // first cell coordinate along axis 0
  double born = 0.0;
  double weighted = 0.0;
};

struct ScenarioResult {
  ScenarioConfig cfg;
  QuantumRun q;
  WeightedEnsemble ens;
  FinalMeasure measure;
  Membership member;
  std::vector<BornRow> born;
  Lemma1Report lemma1;
  std::vector<SigmaRow> sigma;
  std::vector<ScreenRow> screen;
  double visibility = 0.0;
  double screen_error = 0.0;  // max |weighted - born| per detector bin
  double coarse_error = 0.0;  // max over intermediate record times and coarse bins
  std::vector<double> equivariance;  // Bohmian TV distance per record time
  std::vector<Check> checks;

  bool passed() const { return all_pass(checks); }
};

// Weighted classical ensemble for a finished quantum run.
WeightedEnsemble classical_ensemble(const ScenarioConfig& cfg, const QuantumRun& q, const ProposalSpec& prop,
                                    FinalMeasure* measure_out = nullptr);

ScenarioResult run_scenario(const ScenarioConfig& cfg);
ScenarioResult run_two_slit(const ScenarioConfig& cfg);
ScenarioResult run_measurement(const ScenarioConfig& cfg);

// Largest per-row difference of two branch Born tables over the same tree.
double born_table_difference(const std::vector<BornRow>& a, const std::vector<BornRow>& b);

double fringe_visibility(const std::vector<ScreenRow>& screen, double center, double half_width);

// Bohmian ensemble of cfg.bohm_N from |psi0|^2; TV distance to the Born law at each record time.
std::vector<double> equivariance_run(const ScenarioConfig& cfg);

struct IAReport {
  double vmin = 0.0, vmax = 0.0;
  std::vector<double> unconditional_on, unconditional_off;
  std::vector<double> weighted_on, weighted_off;
  double tv_weighted = 0.0;
  double tv_unconditional = 0.0;
  double noise_floor = 0.0;  // 95th percentile of the bootstrap distance
};

// Histograms of the axis-0 initial velocity over the proposal box.
IAReport ia_analysis(const ScenarioResult& on, const ScenarioResult& off, Index bins, Index resamples);

double total_variation(const std::vector<double>& a, const std::vector<double>& b);

struct ChainElement {
  int node = 0;
  Index k = 0;
};

struct ChainRow {
  std::vector<ChainElement> chain;
  bool ordered = false;
  double value = 0.0;  // residual for ordered chains, norm otherwise
};

// Every chain of length 2..chain_max over live nodes at the checkpoint record times.
std::vector<ChainRow> chain_report(const ScenarioConfig& cfg, const QuantumRun& q);

struct LatticeReport {
  StepKernel kernel;
  Index i1 = 0, i3 = 0;
  std::vector<SweepRow> sweep;
  double spearman = 0.0;
  Conjecture1Report window;  // constraint at the largest margin
  std::vector<Check> checks;
};

LatticeReport run_lattice(const ScenarioConfig& cfg);

struct CalibrationResult {
  std::string name;
  std::vector<Check> checks;
  bool passed() const { return all_pass(checks); }
};

std::vector<std::string> calibration_names();
CalibrationResult run_calibration(const std::string& name);

}  // namespace hct
