#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "hct/newtonian.hpp"

using namespace hct;

namespace {

PhysicalParams params(double dt, double T) {
  PhysicalParams p;
  p.dt = dt;
  p.T = T;
  return p;
}

WaveFunction blocks(const SpatialGrid& g, const std::vector<std::pair<Index, Index>>& spans, double t) {
  WaveFunction w{g, Eigen::ArrayXcd::Zero(g.size()), t};
  for (auto [a, b] : spans)
    for (Index i = a; i <= b; ++i) w.amps(i) = 1.0;
  normalize(w);
  return w;
}

ClassicalTrajectory landing(std::vector<std::int32_t> cells) {
  ClassicalTrajectory t;
  t.cells = std::move(cells);
  return t;
}

}  // namespace

TEST_CASE("verlet: free and harmonic motion") {
  const SpatialGrid g = make_grid(-32.0, 32.0, 256);
  const ClassicalTrajectory f = integrate_classical({0.0, 0.0}, {2.0, 0.0}, free_potential(), g, params(0.001, 1.0), 100);
  CHECK(f.xT[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.vT[0] == 2.0);
  CHECK(f.cells.size() == 11);
  CHECK(f.cells[10] == g.cell_of({2.0, 0.0}));

  const double T = 2.0 * std::numbers::pi;
  const ClassicalTrajectory h =
      integrate_classical({1.0, 0.0}, {0.0, 0.0}, harmonic_potential(1.0), g, params(T / 6000.0, T), 6000);
  CHECK(std::abs(h.xT[0] - 1.0) < 1e-6);
  CHECK(std::abs(h.vT[0]) < 1e-3);
  CHECK_FALSE(h.escaped);
}

TEST_CASE("verlet: energy drift and reversibility") {
  const SpatialGrid g = make_grid(-32.0, 32.0, 256);
  const PotentialSpec v = harmonic_potential(0.7);
  const PhysicalParams p = params(0.005, 50.0);
  ForceField force(g, v);
  auto acc = [&](const Point& x, double t, Point& f) { return force.at(x, t, f); };
  VerletState s{{2.0, 0.0}, {0.3, 0.0}};
  const double e0 = classical_energy(s, v, g, p, 0.0);
  double worst = 0.0;
  REQUIRE(verlet(s, acc, 0.0, p.dt, p.steps(), 1, [&](Index, const VerletState& st) {
    worst = std::max(worst, std::abs(classical_energy(st, v, g, p, 0.0) - e0));
  }));
  // shadow-energy bound for the harmonic case: |dE|/E <= (omega dt)^2 / 4
  CHECK(worst / e0 <= std::pow(0.7 * p.dt, 2) / 4.0 + 1e-12);

  const Point x1 = s.x;
  s.v[0] = -s.v[0];
  REQUIRE(verlet(s, acc, 0.0, p.dt, p.steps(), 1));
  CHECK(std::abs(s.x[0] - 2.0) < 1e-9);
  CHECK(std::abs(s.v[0] + 0.3) < 1e-9);
  CHECK(x1[0] != doctest::Approx(2.0));
}

TEST_CASE("verlet: off-grid lookup marks an escape") {
  const SpatialGrid g = make_grid(-4.0, 4.0, 32);
  const ClassicalTrajectory t = integrate_classical({0.0, 0.0}, {10.0, 0.0}, free_potential(), g, params(0.01, 1.0), 10);
  CHECK(t.escaped);
  CHECK(t.cells.back() == -1);
}

TEST_CASE("assign_weights arithmetic") {
  const SpatialGrid g = make_grid(0.0, 64.0, 64);
  const WaveFunction flat = blocks(g, {{0, 63}}, 0.0);
  Eigen::ArrayXi labels(64);
  labels.head(32).setConstant(0);
  labels.tail(32).setConstant(1);
  const FinalMeasure m = measure_from_labels(labels, flat);
  CHECK(m.mass[0] == doctest::Approx(0.5));
  CHECK(m.mass[2] == 0.0);
  const DisjointParams dp;

  WeightedEnsemble e;
  for (int i = 0; i < 100; ++i) e.traj.push_back(landing({10}));
  for (int i = 0; i < 300; ++i) e.traj.push_back(landing({40}));
  assign_weights(e, m, dp);
  CHECK(e.traj[0].weight == doctest::Approx(0.5 / 100));
  CHECK(e.traj[399].weight == doctest::Approx(0.5 / 300));
  CHECK(e.renorm == doctest::Approx(1.0));
  CHECK(e.underfilled.empty());
  Mask left = Mask::Constant(64, false);
  left.head(32).setConstant(true);
  CHECK(pushforward_mass(e, left, 0) == doctest::Approx(0.5));

  Eigen::ArrayXi one = Eigen::ArrayXi::Zero(64);
  WeightedEnsemble s;
  for (int i = 0; i < 250; ++i) s.traj.push_back(landing({std::int32_t(i % 64)}));
  assign_weights(s, measure_from_labels(one, flat), dp);
  for (const auto& t : s.traj) CHECK(t.weight == doctest::Approx(1.0 / 250));

  WeightedEnsemble few;
  for (int i = 0; i < 50; ++i) few.traj.push_back(landing({5}));
  for (int i = 0; i < 7; ++i) few.traj.push_back(landing({50}));
  assign_weights(few, m, dp);
  CHECK(few.underfilled == std::vector<Index>{1});

  WeightedEnsemble miss;
  for (int i = 0; i < 50; ++i) miss.traj.push_back(landing({5}));
  CHECK_THROWS_AS(assign_weights(miss, m, dp), CoverageError);

  // bins below eps_branch may stay empty; the weights renormalise over the rest
  WaveFunction lopsided = flat;
  lopsided.amps.tail(32) *= 1e-3;
  normalize(lopsided);
  const FinalMeasure ml = measure_from_labels(labels, lopsided);
  REQUIRE(ml.mass[1] < dp.eps_branch);
  WeightedEnsemble part;
  for (int i = 0; i < 40; ++i) part.traj.push_back(landing({5}));
  assign_weights(part, ml, dp);
  CHECK(part.renorm == doctest::Approx(ml.mass[0]));
  CHECK(part.traj[0].weight == doctest::Approx(1.0 / 40));
}

TEST_CASE("run_classical: proposal sampling and escape guard") {
  const SpatialGrid g = make_grid(-32.0, 32.0, 256);
  const PhysicalParams p = params(0.01, 2.0);
  const WaveFunction psi = init_gaussian(g, 0.0, 0.0, 1.0);
  const Mask S0 = psi.density() > 1e-8;
  ProposalSpec prop;
  prop.vmin = {-1.0, 0.0};
  prop.vmax = {1.0, 0.0};
  prop.N = 4000;
  prop.seed = 5;
  const WeightedEnsemble a = run_classical(psi, S0, free_potential(), p, prop, 50);
  const WeightedEnsemble b = run_classical(psi, S0, free_potential(), p, prop, 50);
  REQUIRE(a.traj.size() == 4000);
  CHECK(a.record_times == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});
  double mv = 0.0, mv2 = 0.0;
  for (std::size_t i = 0; i < a.traj.size(); ++i) {
    CHECK(a.traj[i].x0 == b.traj[i].x0);
    CHECK(a.traj[i].v0 == b.traj[i].v0);
    CHECK(a.traj[i].xT[0] == doctest::Approx(a.traj[i].x0[0] + 2.0 * a.traj[i].v0[0]));
    mv += a.traj[i].v0[0];
    mv2 += a.traj[i].v0[0] * a.traj[i].v0[0];
  }
  // uniform on [-1, 1]: mean 0, second moment 1/3
  CHECK(std::abs(mv / 4000) < 4.0 * std::sqrt(1.0 / 3.0 / 4000));
  CHECK(mv2 / 4000 == doctest::Approx(1.0 / 3.0).epsilon(0.05));

  ProposalSpec wild = prop;
  wild.vmin = {-40.0, 0.0};
  wild.vmax = {40.0, 0.0};
  CHECK_THROWS_AS(run_classical(psi, S0, free_potential(), p, wild, 50), ConfigError);
  ProposalSpec bad = prop;
  bad.vmax = {-2.0, 0.0};
  CHECK_THROWS_AS(run_classical(psi, S0, free_potential(), p, bad, 50), ConfigError);
}

TEST_CASE("branch membership and trajectory consistency") {
  const SpatialGrid g = make_grid(0.0, 64.0, 64);
  const DisjointParams dp;
  BranchTree t = make_tree(g, dp);
  update_tree(t, blocks(g, {{20, 40}}, 0.0), dp);
  update_tree(t, blocks(g, {{18, 27}, {33, 42}}, 1.0), dp);
  update_tree(t, blocks(g, {{16, 25}, {35, 44}}, 2.0), dp);
  confirm_tree(t);
  REQUIRE(t.nodes.size() == 3);
  const int L = t.nodes[0].children[0], R = t.nodes[0].children[1];

  WeightedEnsemble e;
  e.traj = {landing({30, 20, 18}), landing({30, 20, 40}), landing({30, 30, 18}), landing({25, 40, 40})};
  const std::vector<double> w{0.4, 0.1, 0.2, 0.3};
  for (std::size_t i = 0; i < 4; ++i) e.traj[i].weight = w[i];
  const Membership m = branch_membership(e, t);
  CHECK(m[0] == std::vector<int>{0, 0, 0, 0});
  CHECK(m[1] == std::vector<int>{L, L, -1, R});
  CHECK(m[2] == std::vector<int>{L, R, L, R});

  const Lemma1Report r = lemma1_report(e, t, m);
  CHECK(r.sibling == doctest::Approx(0.1));
  CHECK(r.outside == doctest::Approx(0.2));
  CHECK(r.reentry == doctest::Approx(0.2));
  CHECK(r.outside_unweighted == doctest::Approx(0.25));

  for (const BornRow& row : branch_born_report(e, t, m)) {
    if (row.node == L && row.time == 2.0) CHECK(row.mu == doctest::Approx(0.6));
    if (row.node == R && row.time == 1.0) CHECK(row.mu == doctest::Approx(0.3));
    if (row.node == 0) CHECK(row.born == doctest::Approx(1.0));
  }
  // left descendants at k = 1 hold 0.5; the left support carries half the mass at the horizon
  CHECK(sigma_consistency(e, t, m, L, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sigma_consistency(e, t, m, R, 2) == doctest::Approx(0.1));
}
