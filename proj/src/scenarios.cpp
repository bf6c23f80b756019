#include "hct/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace hct {

namespace {

constexpr double kNormDrift = 1e-9;
constexpr double kBornRow = 0.02;
constexpr double kLemma1 = 0.01;
constexpr double kSigma = 0.02;
constexpr double kVisibilityOn = 0.5;
constexpr double kVisibilityOff = 0.2;
constexpr double kCoarse = 0.03;
constexpr double kEquivariance = 0.03;

Index record_of(const ScenarioConfig& cfg, double t) {
  return Index(std::llround(t / (cfg.phys.dt * double(cfg.record_every))));
}

std::map<Index, double> coarse_histogram(const WaveFunction& psi, const CoarseBins& cb) {
  std::map<Index, double> h;
  const Eigen::ArrayXd rho = psi.density();
  const SpatialGrid& g = psi.grid;
  for (Index f = 0; f < g.size(); ++f)
    if (rho(f) > 0.0) h[cb.of(g.point(f)[0])] += rho(f) * g.dV();
  return h;
}

bool coupling_active(const PotentialSpec& v) {
  for (const auto& t : v.terms)
    if (t.kind == PotentialKind::Coupling && t.on && t.t_off > t.t_on && t.strength != 0.0) return true;
  return false;
}

std::vector<double> velocity_histogram(const WeightedEnsemble& e, const std::vector<std::size_t>& idx, double lo,
                                       double hi, Index bins, bool weighted) {
  std::vector<double> h(std::size_t(bins), 0.0);
  double total = 0.0;
  for (std::size_t i : idx) {
    const auto& t = e.traj[i];
    const double w = weighted ? t.weight : 1.0;
    const Index b = std::clamp<Index>(Index((t.v0[0] - lo) / (hi - lo) * double(bins)), 0, bins - 1);
    h[std::size_t(b)] += w;
    total += w;
  }
  if (total > 0.0)
    for (double& x : h) x /= total;
  return h;
}

}  // namespace

bool all_pass(const std::vector<Check>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass(); });
}

QuantumRun run_quantum(const ScenarioConfig& cfg, const RecordHook& on_record) {
  const PotentialSpec v = effective_potential(cfg);
  const DisjointParams& dp = cfg.disjoint;
  QuantumRun q;
  WaveFunction psi = initial_state(cfg);
  q.psi0 = psi;
  q.tree = make_tree(cfg.grid, dp);
  const Index K = cfg.phys.steps() / cfg.record_every;
  std::set<Index> keep{0, K};
  for (double t : cfg.checkpoints) keep.insert(record_of(cfg, t));
  if (cfg.snapshot_every > 0)
    for (Index k = 0; k <= K; k += cfg.snapshot_every) keep.insert(k);
  const CoarseBins cb{cfg.detector.coarse_width};

  auto record = [&](Index k) {
    update_tree(q.tree, psi, dp);
    q.norm_drift.push_back(std::abs(psi.norm2() - 1.0));
    q.max_edge = std::max(q.max_edge, edge_mass(psi, dp.gap_cells + 1));
    if (keep.count(k)) q.snapshots.emplace(k, psi);
    if (cb.width > 0.0) q.coarse_born.push_back(coarse_histogram(psi, cb));
    if (on_record) on_record(k, psi);
  };

  SplitOperator op(cfg.grid, v, cfg.phys);
  record(0);
  for (Index k = 1; k <= K; ++k) {
    op.advance(psi, cfg.record_every);
    record(k);
  }
  confirm_tree(q.tree);
  q.psiT = psi;
  return q;
}

WeightedEnsemble classical_ensemble(const ScenarioConfig& cfg, const QuantumRun& q, const ProposalSpec& prop,
                                    FinalMeasure* measure_out) {
  const Mask S0 = q.tree.nodes[std::size_t(q.tree.root)].support(0).mask(cfg.grid);
  WeightedEnsemble e = run_classical(q.psi0, S0, effective_potential(cfg), cfg.phys, prop, cfg.record_every);
  FinalMeasure m = make_final_measure(q.tree, q.psiT, cfg.detector.bin_cells);
  assign_weights(e, m, cfg.disjoint, cfg.n_min);
  if (measure_out) *measure_out = std::move(m);
  return e;
}

double born_table_difference(const std::vector<BornRow>& a, const std::vector<BornRow>& b) {
  if (a.size() != b.size()) throw ArgumentError("Born tables have different rows");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].node != b[i].node || std::abs(a[i].time - b[i].time) > 1e-9)
      throw ArgumentError("Born tables have different rows");
    d = std::max(d, std::abs(a[i].mu - b[i].mu));
  }
  return d;
}

double fringe_visibility(const std::vector<ScreenRow>& screen, double center, double half_width) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : screen)
    if (std::abs(r.x - center) <= half_width) {
      lo = std::min(lo, r.born);
      hi = std::max(hi, r.born);
    }
  if (!(hi > 0.0)) throw DegenerateStateError("no screen bins inside the fringe window");
  return (hi - lo) / (hi + lo);
}

std::vector<double> equivariance_run(const ScenarioConfig& cfg) {
  const PotentialSpec v = effective_potential(cfg);
  WaveFunction psi = initial_state(cfg);
  const std::vector<Point> x0 = sample_born(psi, cfg.bohm_N, splitmix64(cfg.seed, 0xB0u));
  const GuidedEnsemble e = integrate_guided(psi, v, cfg.phys, x0, cfg.record_every);
  SplitOperator op(cfg.grid, v, cfg.phys);
  std::vector<double> out;
  std::vector<Point> xs(x0.size());
  for (std::size_t k = 0; k < e.record_times.size(); ++k) {
    if (k > 0) op.advance(psi, cfg.record_every);
    for (std::size_t t = 0; t < xs.size(); ++t) xs[t] = e.traj[t].samples[k];
    out.push_back(equivariance_distance(xs, psi, cfg.bohm_bins));
  }
  return out;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  if (cfg.kind == ScenarioKind::Lattice) throw ArgumentError("lattice configs run through sweep-margin");
  ScenarioResult r;
  r.cfg = cfg;
  r.q = run_quantum(cfg);
  const BranchTree& tree = r.q.tree;
  const Index K = tree.steps() - 1;

  r.ens = classical_ensemble(cfg, r.q, cfg.proposal, &r.measure);
  r.member = branch_membership(r.ens, tree);
  r.born = branch_born_report(r.ens, tree, r.member);
  r.lemma1 = lemma1_report(r.ens, tree, r.member);
  for (double t : cfg.checkpoints) {
    const Index k = tree.time_index(t);
    if (k <= 0 || k >= K) continue;
    for (int id : tree.live(k)) r.sigma.push_back({id, t, sigma_consistency(r.ens, tree, r.member, id, k)});
  }

  std::vector<double> weighted(r.measure.mass.size(), 0.0);
  for (const auto& t : r.ens.traj)
    if (t.final_bin >= 0) weighted[std::size_t(t.final_bin)] += t.weight;
  std::vector<Index> first(r.measure.mass.size(), -1);
  for (Index f = 0; f < cfg.grid.size(); ++f) {
    Index& c = first[std::size_t(r.measure.bin_of_cell(f))];
    if (c < 0) c = f;
  }
  for (std::size_t b = 0; b < r.measure.mass.size(); ++b) {
    if (int(b) == r.measure.residual) continue;
    r.screen.push_back({int(b), r.measure.leaf_of_bin[b], cfg.grid.point(first[b])[0], r.measure.mass[b], weighted[b]});
    r.screen_error = std::max(r.screen_error, std::abs(weighted[b] - r.measure.mass[b]));
  }

  if (cfg.detector.coarse_width > 0.0) {
    const CoarseBins cb{cfg.detector.coarse_width};
    for (Index k = 1; k < K; ++k) {
      std::map<Index, double> cl;
      for (const auto& t : r.ens.traj) {
        const std::int32_t c = t.cells[std::size_t(k)];
        if (c >= 0) cl[cb.of(cfg.grid.point(c)[0])] += t.weight;
      }
      std::map<Index, double> diff = r.q.coarse_born[std::size_t(k)];
      for (auto& [b, m] : diff) m = -m;
      for (const auto& [b, m] : cl) diff[b] += m;
      for (const auto& [b, d] : diff) r.coarse_error = std::max(r.coarse_error, std::abs(d));
    }
  }
  if (cfg.bohm_N > 0) r.equivariance = equivariance_run(cfg);

  auto& ch = r.checks;
  double drift = 0.0;
  for (double d : r.q.norm_drift) drift = std::max(drift, d);
  ch.push_back({"norm drift", drift, kNormDrift});
  ch.push_back({"edge leakage", r.q.max_edge, cfg.disjoint.eps_leak});
  double born = 0.0;
  for (const auto& row : r.born) born = std::max(born, row.delta());
  ch.push_back({"branch Born rule", born, kBornRow});
  ch.push_back({"lemma1 sibling", r.lemma1.sibling, kLemma1});
  ch.push_back({"lemma1 reentry", r.lemma1.reentry, kLemma1});
  ch.push_back({"lemma1 outside", r.lemma1.outside, kLemma1});
  if (!r.sigma.empty()) {
    double s = 0.0;
    for (const auto& row : r.sigma) s = std::max(s, row.discrepancy);
    ch.push_back({"sigma consistency", s, kSigma});
  }
  if (!r.equivariance.empty()) {
    double d = 0.0;
    for (double x : r.equivariance) d = std::max(d, x - r.equivariance.front());
    ch.push_back({"equivariance excess", d, kEquivariance});
  }

  if (cfg.kind == ScenarioKind::TwoSlit) {
    r.visibility = fringe_visibility(r.screen, mean_position(r.q.psiT), cfg.detector.fringe_window);
    if (cfg.field) ch.push_back({"visibility (field on)", r.visibility, kVisibilityOn, true});
    else ch.push_back({"visibility (field off)", r.visibility, kVisibilityOff});
    ch.push_back({"screen histogram", r.screen_error, cfg.disjoint.eps_leak});
    if (cfg.detector.coarse_width > 0.0) ch.push_back({"coarse histograms", r.coarse_error, kCoarse});
  }
  if (cfg.kind == ScenarioKind::Measurement) {
    const std::vector<int> leaves = tree.leaves();
    if (coupling_active(effective_potential(cfg))) {
      ch.push_back({"leaf count", double(leaves.size()), double(cfg.packet.size()) - 0.5, true});
      std::vector<double> want, got;
      double norm = 0.0;
      for (const auto& pc : cfg.packet) norm += std::norm(pc.coeff);
      for (const auto& pc : cfg.packet) want.push_back(std::norm(pc.coeff) / norm);
      for (int id : leaves) got.push_back(tree.nodes[std::size_t(id)].packet_mass);
      std::sort(want.begin(), want.end());
      std::sort(got.begin(), got.end());
      double dev = got.size() == want.size() ? 0.0 : 1.0;
      for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) dev = std::max(dev, std::abs(got[i] - want[i]));
      ch.push_back({"leaf masses", dev, cfg.disjoint.eps_leak});
    } else {
      ch.push_back({"single leaf without coupling", double(leaves.size()), 1.5});
    }
  }
  return r;
}

ScenarioResult run_two_slit(const ScenarioConfig& cfg) {
  if (cfg.kind != ScenarioKind::TwoSlit) throw ArgumentError("run_two_slit needs a two-slit config");
  return run_scenario(cfg);
}

ScenarioResult run_measurement(const ScenarioConfig& cfg) {
  if (cfg.kind != ScenarioKind::Measurement) throw ArgumentError("run_measurement needs a measurement config");
  ScenarioResult r = run_scenario(cfg);
  if (coupling_active(effective_potential(cfg)) && r.q.tree.leaves().size() < cfg.packet.size()) {
    std::ostringstream os;
    os << "pointer packets re-merged before T (" << r.q.tree.leaves().size()
       << " leaf); strengthen the coupling or lengthen its window";
    r.checks.push_back({os.str(), 1.0, 0.0});
  }
  return r;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ArgumentError("histogram size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

IAReport ia_analysis(const ScenarioResult& on, const ScenarioResult& off, Index bins, Index resamples) {
  const ProposalSpec &a = on.cfg.proposal, &b = off.cfg.proposal;
  if (!(on.cfg.grid == off.cfg.grid) || a.N != b.N || a.vmin != b.vmin || a.vmax != b.vmax ||
      a.position != b.position || on.ens.traj.size() != off.ens.traj.size())
    throw ArgumentError("IA analysis needs runs sharing grid and proposal");
  IAReport r;
  r.vmin = a.vmin[0];
  r.vmax = a.vmax[0];
  std::vector<std::size_t> all(on.ens.traj.size());
  std::iota(all.begin(), all.end(), 0);
  r.unconditional_on = velocity_histogram(on.ens, all, r.vmin, r.vmax, bins, false);
  r.unconditional_off = velocity_histogram(off.ens, all, r.vmin, r.vmax, bins, false);
  r.weighted_on = velocity_histogram(on.ens, all, r.vmin, r.vmax, bins, true);
  r.weighted_off = velocity_histogram(off.ens, all, r.vmin, r.vmax, bins, true);
  r.tv_weighted = total_variation(r.weighted_on, r.weighted_off);
  r.tv_unconditional = total_variation(r.unconditional_on, r.unconditional_off);

  // noise floor: distance between two independent resamples of the same run
  std::mt19937_64 rng(splitmix64(a.seed, 0xB007u));
  const std::size_t n = all.size();
  std::vector<double> d;
  std::vector<std::size_t> i1(n), i2(n);
  for (const ScenarioResult* run : {&on, &off})
    for (Index s = 0; s < resamples; ++s) {
      for (std::size_t i = 0; i < n; ++i) i1[i] = std::size_t(rng() % n);
      for (std::size_t i = 0; i < n; ++i) i2[i] = std::size_t(rng() % n);
      d.push_back(total_variation(velocity_histogram(run->ens, i1, r.vmin, r.vmax, bins, true),
                                  velocity_histogram(run->ens, i2, r.vmin, r.vmax, bins, true)));
    }
  std::sort(d.begin(), d.end());
  if (!d.empty()) r.noise_floor = d[std::min(d.size() - 1, std::size_t(std::ceil(0.95 * double(d.size()))) - 1)];
  return r;
}

std::vector<ChainRow> chain_report(const ScenarioConfig& cfg, const QuantumRun& q) {
  const BranchTree& tree = q.tree;
  std::vector<Index> ks;
  for (double t : cfg.checkpoints) {
    const Index k = tree.time_index(t);
    if (k < 0 || !q.snapshots.count(k)) throw ArgumentError("checkpoint is not a stored record time");
    ks.push_back(k);
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const SpatialGrid& g = cfg.grid;
  SplitOperator op(g, effective_potential(cfg), cfg.phys);
  auto region = [&](int id, Index k) { return tree.nodes[std::size_t(id)].support(k).mask(g); };

  std::vector<ChainRow> rows;
  std::vector<ChainElement> chain;
  std::function<void(const WaveFunction&, std::size_t)> extend = [&](const WaveFunction& psi, std::size_t i) {
    if (chain.size() >= 2) {
      ChainRow row{chain, true, 0.0};
      for (std::size_t c = 1; c < chain.size(); ++c)
        row.ordered = row.ordered && compare(tree, chain[c - 1].node, chain[c - 1].k, chain[c].node, chain[c].k).a_le_b;
      if (row.ordered) {
        WaveFunction ref = project(q.snapshots.at(chain.back().k), region(chain.back().node, chain.back().k));
        ref.amps -= psi.amps;
        row.value = norm_of(ref);
      } else {
        row.value = norm_of(psi);
      }
      rows.push_back(std::move(row));
    }
    if (Index(chain.size()) >= cfg.chain_max) return;
    WaveFunction cur = psi;
    for (std::size_t j = i + 1; j < ks.size(); ++j) {
      op.advance(cur, (ks[j] - ks[j - 1]) * cfg.record_every);
      for (int id : tree.live(ks[j])) {
        chain.push_back({id, ks[j]});
        extend(project(cur, region(id, ks[j])), j);
        chain.pop_back();
      }
    }
  };
  for (std::size_t i = 0; i < ks.size(); ++i)
    for (int id : tree.live(ks[i])) {
      chain.push_back({id, ks[i]});
      extend(project(q.snapshots.at(ks[i]), region(id, ks[i])), i);
      chain.pop_back();
    }
  return rows;
}

LatticeReport run_lattice(const ScenarioConfig& cfg) {
  if (cfg.kind != ScenarioKind::Lattice) throw ArgumentError("sweep-margin needs a lattice config");
  const LatticeSpec& L = cfg.lattice;
  LatticeReport r;
  r.kernel = build_kernel(cfg.grid, effective_potential(cfg), cfg.phys.dt, cfg.phys.hbar, cfg.phys.mass[0], L.eps);
  r.i1 = cfg.grid.cell_of(0, L.x1);
  r.i3 = cfg.grid.cell_of(0, L.x3);
  if (r.i1 < 0 || r.i3 < 0) throw ConfigError("lattice endpoints lie outside the grid");
  if (L.margins.size() < 2) throw ConfigError("margin sweep needs at least two margins");
  r.sweep = margin_sweep(r.kernel, L.n_slices, L.t2_slice, r.i1, r.i3, L.margins);
  std::vector<double> dev;
  for (const auto& row : r.sweep) dev.push_back(row.deviation);
  r.spearman = spearman(L.margins, dev);

  const ShotPath sp = shoot_classical(r.kernel, L.n_slices, cfg.grid.coord(0, r.i1), cfg.grid.coord(0, r.i3));
  const double x2 = sp.x[std::size_t(L.t2_slice)];
  const double w = fresnel_width(r.kernel, L.t2_slice, L.n_slices);
  const double mmax = *std::max_element(L.margins.begin(), L.margins.end());
  r.window = conjecture1_test(r.kernel, L.n_slices, L.t2_slice, interval_mask(cfg.grid, x2 - mmax * w, x2 + mmax * w),
                              r.i1, r.i3);

  for (const auto& row : r.sweep)
    if (row.margin >= 4.0) {
      std::ostringstream a, b;
      a << "window deviation at margin " << row.margin;
      b << "complement ratio at margin " << row.margin;
      r.checks.push_back({a.str(), row.deviation, 0.1});
      r.checks.push_back({b.str(), row.complement, 0.15});
    }
  r.checks.push_back({"margin sweep spearman", r.spearman, -0.8});
  return r;
}

std::vector<std::string> calibration_names() {
  return {"free-spread", "harmonic-revival", "equivariance", "propagator-composition"};
}

CalibrationResult run_calibration(const std::string& name) {
  CalibrationResult r{name, {}};
  PhysicalParams p;
  if (name == "free-spread") {
    const SpatialGrid g = make_grid(-32.0, 32.0, 512);
    p.dt = 0.001;
    p.T = 2.0;
    const WaveFunction psi = evolve(init_gaussian(g, 0.0, 0.0, 1.0), free_potential(), p, p.steps());
    const double want = std::sqrt(1.0 + std::pow(p.T / 2.0, 2));
    r.checks.push_back({"width ratio low", position_width(psi) / want, 0.995, true});
    r.checks.push_back({"width ratio high", position_width(psi) / want, 1.005});
    r.checks.push_back({"norm drift", std::abs(psi.norm2() - 1.0), 1e-9});
  } else if (name == "harmonic-revival") {
    const SpatialGrid g = make_grid(-16.0, 16.0, 256);
    p.dt = 2.0 * std::numbers::pi / 4096.0;
    p.T = 2.0 * std::numbers::pi;
    const WaveFunction psi0 = init_gaussian(g, 1.5, 0.5, 0.8);
    const WaveFunction psi = evolve(psi0, harmonic_potential(1.0), p, p.steps());
    r.checks.push_back({"revival overlap", std::abs(overlap(psi, psi0)), 0.999, true});
  } else if (name == "equivariance") {
    ScenarioConfig c;
    c.grid = make_grid(-48.0, 48.0, 512);
    c.phys.dt = 0.003;
    c.phys.T = 6.0;
    c.record_every = 200;
    c.bohm_N = 10000;
    c.bohm_bins = 50;
    c.packet = {PacketComponent{{1.0, 0.0}, {-2.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}}};
    for (const char* law : {"free", "harmonic"}) {
      c.potential = std::string(law) == "free" ? free_potential() : harmonic_potential(0.5);
      const std::vector<double> d = equivariance_run(c);
      double worst = 0.0;
      for (double x : d) worst = std::max(worst, x - d.front());
      r.checks.push_back({std::string(law) + " equivariance excess", worst, kEquivariance});
    }
  } else if (name == "propagator-composition") {
    const SpatialGrid small = make_grid(-4.0, 4.0, 32);
    const StepKernel k = build_kernel(small, harmonic_potential(0.5), 0.7, 1.0, 1.0, 0.05);
    const LatticePropagator prop = propagate(k, 3);
    const double dx = small.dx(0);
    double worst = 0.0;
    for (Index i = 0; i < 32; ++i)
      for (Index j = 0; j < 32; ++j) {
        cplx s = 0.0;
        for (Index a = 0; a < 32; ++a)
          for (Index b = 0; b < 32; ++b) s += k.K(i, a) * k.K(a, b) * k.K(b, j);
        s *= dx * dx;
        worst = std::max(worst, std::abs(prop.K(i, j) - s) / std::abs(s));
      }
    r.checks.push_back({"transfer matrix vs path enumeration", worst, 1e-12});

    // free kernel with complex mass m(1 + i eps) against its closed form
    const SpatialGrid g = make_grid(-51.2, 51.2, 1024);
    const double eps = 0.01, dt = 1.5 * 9.0 * 0.01 / (std::numbers::pi * std::numbers::pi * eps);
    const Index n = 16, i1 = 512;
    const StepKernel f = build_kernel(g, free_potential(), dt, 1.0, 1.0, eps);
    const Eigen::VectorXcd col = propagate_column(f, n, i1);
    const double T = double(n) * dt;
    const cplx mt(1.0, eps), I(0.0, 1.0);
    double err = 0.0;
    for (Index i = 0; i < g.n[0]; ++i) {
      const double d = g.coord(0, i) - g.coord(0, i1);
      if (std::abs(d) > std::sqrt(T)) continue;
      const cplx want = std::sqrt(mt / (2.0 * std::numbers::pi * I * T)) * std::exp(I * mt * d * d / (2.0 * T));
      err = std::max(err, std::abs(col(i) - want) / std::abs(want));
    }
    r.checks.push_back({"free lattice vs closed form", err, 0.02});
  } else {
    throw ArgumentError("unknown calibration '" + name + "'");
  }
  return r;
}

}  // namespace hct
