#include "hct/newtonian.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "hct/bohmian.hpp"

namespace hct {

ForceField::ForceField(const SpatialGrid& g, const PotentialSpec& v) : grid_(g), pot_(v) {}

const std::array<Eigen::ArrayXd, 2>& ForceField::field(unsigned set) {
  auto it = cache_.find(set);
  if (it != cache_.end()) return it->second;
  const Eigen::ArrayXd V = sample_potential(pot_, grid_, set);
  std::array<Eigen::ArrayXd, 2> F{Eigen::ArrayXd::Zero(grid_.size()), Eigen::ArrayXd::Zero(grid_.size())};
  for (int a = 0; a < grid_.dim; ++a) {
    const Index step = a == 0 ? 1 : grid_.n[0];
    const double h = 2.0 * grid_.dx(a);
    for (Index f = 0; f < grid_.size(); ++f) {
      const Index i = a == 0 ? f % grid_.n[0] : f / grid_.n[0];
      if (i == 0 || i == grid_.n[a] - 1) continue;
      F[a](f) = -(V(f + step) - V(f - step)) / h;
    }
  }
  return cache_.emplace(set, std::move(F)).first->second;
}

bool ForceField::at(const Point& x, double t, Point& f) {
  const SpatialGrid& g = grid_;
  const double fx = (x[0] - g.lo[0]) / g.dx(0);
  if (!(fx >= 0.0) || !(fx <= double(g.n[0] - 1))) return false;
  double fy = 0.0;
  if (g.dim == 2) {
    fy = (x[1] - g.lo[1]) / g.dx(1);
    if (!(fy >= 0.0) || !(fy <= double(g.n[1] - 1))) return false;
  }
  const unsigned set = pot_.active_set(t);
  f = {0.0, 0.0};
  if (set == 0) return true;
  const auto& F = field(set);
  const Index i = std::min<Index>(Index(fx), g.n[0] - 2);
  const double a = fx - double(i);
  if (g.dim == 1) {
    f[0] = F[0](i) * (1 - a) + F[0](i + 1) * a;
    return true;
  }
  const Index j = std::min<Index>(Index(fy), g.n[1] - 2);
  const double b = fy - double(j);
  const Index c00 = g.flat(i, j), c10 = g.flat(i + 1, j), c01 = g.flat(i, j + 1), c11 = g.flat(i + 1, j + 1);
  for (int d = 0; d < 2; ++d)
    f[d] = F[d](c00) * (1 - a) * (1 - b) + F[d](c10) * a * (1 - b) + F[d](c01) * (1 - a) * b + F[d](c11) * a * b;
  return true;
}

void ForceField::warm(const PhysicalParams& p, double t0) {
  for (Index s = 0; s <= p.steps(); ++s) {
    const unsigned set = pot_.active_set(t0 + double(s) * p.dt);
    if (set != 0) field(set);
  }
}

bool verlet(VerletState& s, const std::function<bool(const Point&, double, Point&)>& force, double t0, double dt,
            Index n, int dim, const std::function<void(Index, const VerletState&)>& on_step) {
  Point f;
  if (!force(s.x, t0, f)) return false;
  for (Index i = 0; i < n; ++i) {
    const double t = t0 + double(i) * dt;
    for (int a = 0; a < dim; ++a) {
      s.v[a] += 0.5 * dt * f[a];
      s.x[a] += dt * s.v[a];
    }
    if (!force(s.x, t + dt, f)) return false;
    for (int a = 0; a < dim; ++a) s.v[a] += 0.5 * dt * f[a];
    if (on_step) on_step(i + 1, s);
  }
  return true;
}

ClassicalTrajectory integrate_classical(const Point& x0, const Point& v0, ForceField& force, const PhysicalParams& p,
                                        Index record_every, double t0) {
  const SpatialGrid& g = force.grid();
  const Index steps = p.steps();
  if (record_every < 1 || steps % record_every != 0)
    throw ConfigError("record cadence must divide the step count");
  ClassicalTrajectory tr;
  tr.x0 = x0;
  tr.v0 = v0;
  tr.cells.assign(std::size_t(steps / record_every + 1), -1);
  tr.cells[0] = std::int32_t(g.cell_of(x0));
  Point mass_inv{1.0 / p.mass[0], 1.0 / p.mass[1]};
  auto acc = [&](const Point& x, double t, Point& f) {
    if (!force.at(x, t, f)) return false;
    f[0] *= mass_inv[0];
    f[1] *= mass_inv[1];
    return true;
  };
  VerletState s{x0, v0};
  const bool ok = verlet(s, acc, t0, p.dt, steps, g.dim, [&](Index i, const VerletState& st) {
    if (i % record_every == 0) tr.cells[std::size_t(i / record_every)] = std::int32_t(g.cell_of(st.x));
  });
  tr.xT = s.x;
  tr.vT = s.v;
  tr.escaped = !ok;
  return tr;
}

ClassicalTrajectory integrate_classical(const Point& x0, const Point& v0, const PotentialSpec& v,
                                        const SpatialGrid& g, const PhysicalParams& p, Index record_every) {
  ForceField f(g, v);
  return integrate_classical(x0, v0, f, p, record_every);
}

double classical_energy(const VerletState& s, const PotentialSpec& v, const SpatialGrid& g, const PhysicalParams& p,
                        double t) {
  double e = potential_at(v, g, s.x, t);
  for (int a = 0; a < g.dim; ++a) e += 0.5 * p.mass[a] * s.v[a] * s.v[a];
  return e;
}

WeightedEnsemble run_classical(const WaveFunction& psi0, const Mask& S0, const PotentialSpec& v,
                               const PhysicalParams& p, const ProposalSpec& prop, Index record_every) {
  const SpatialGrid& g = psi0.grid;
  if (prop.N < 1) throw ConfigError("proposal N must be positive");
  for (int a = 0; a < g.dim; ++a)
    if (!(prop.vmax[a] > prop.vmin[a])) throw ConfigError("velocity box must satisfy vmin < vmax");
  const Eigen::ArrayXd w = prop.position == ProposalSpec::Position::Born
                               ? Eigen::ArrayXd(S0.select(psi0.density(), 0.0))
                               : Eigen::ArrayXd(S0.cast<double>());
  const std::vector<Point> x0 = sample_density(g, w, prop.N, prop.seed);
  const std::uint64_t vseed = splitmix64(prop.seed, ~std::uint64_t(0));

  ForceField force(g, v);
  force.warm(p, psi0.time);
  WeightedEnsemble e;
  e.traj.resize(std::size_t(prop.N));
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < prop.N; ++i) {
    std::mt19937_64 rng(splitmix64(vseed, std::uint64_t(i)));
    Point v0{0.0, 0.0};
    for (int a = 0; a < g.dim; ++a)
      v0[a] = prop.vmin[a] + (prop.vmax[a] - prop.vmin[a]) * (double(rng() >> 11) * 0x1.0p-53);
    e.traj[std::size_t(i)] = integrate_classical(x0[std::size_t(i)], v0, force, p, record_every, psi0.time);
  }
  for (Index k = 0; k <= p.steps() / record_every; ++k)
    e.record_times.push_back(psi0.time + double(k * record_every) * p.dt);
  for (const auto& t : e.traj) e.escaped += t.escaped ? 1 : 0;
  if (double(e.escaped) > 0.2 * double(prop.N)) {
    std::ostringstream os;
    os << "escaped proposal fraction " << double(e.escaped) / double(prop.N) << " exceeds 0.2";
    throw ConfigError(os.str());
  }
  return e;
}

FinalMeasure make_final_measure(const BranchTree& tree, const WaveFunction& psiT, std::array<Index, 2> bin_cells) {
  const SpatialGrid& g = tree.grid;
  const Index K = tree.steps() - 1;
  Eigen::ArrayXi leaf = Eigen::ArrayXi::Constant(g.size(), -1);
  for (int id : tree.live(K)) tree.nodes[std::size_t(id)].support(K).paint(g, leaf, id);
  std::map<std::array<Index, 3>, int> key_to_bin;
  for (Index f = 0; f < g.size(); ++f)
    if (leaf(f) >= 0) key_to_bin.emplace(std::array<Index, 3>{leaf(f), (f % g.n[0]) / bin_cells[0],
                                                              (f / g.n[0]) / bin_cells[1]},
                                         0);
  FinalMeasure m;
  int next = 0;
  for (auto& [key, id] : key_to_bin) {
    id = next++;
    m.leaf_of_bin.push_back(int(key[0]));
  }
  m.residual = next;
  m.leaf_of_bin.push_back(-1);
  m.bin_of_cell.resize(g.size());
  m.mass.assign(std::size_t(next + 1), 0.0);
  const Eigen::ArrayXd rho = psiT.density();
  for (Index f = 0; f < g.size(); ++f) {
    const int b = leaf(f) < 0 ? m.residual
                              : key_to_bin.at({leaf(f), (f % g.n[0]) / bin_cells[0], (f / g.n[0]) / bin_cells[1]});
    m.bin_of_cell(f) = b;
    m.mass[std::size_t(b)] += rho(f) * g.dV();
  }
  return m;
}

FinalMeasure measure_from_labels(const Eigen::ArrayXi& labels, const WaveFunction& psiT) {
  FinalMeasure m;
  const int nb = labels.maxCoeff() + 1;
  m.residual = nb;
  m.leaf_of_bin.assign(std::size_t(nb), 0);
  m.leaf_of_bin.push_back(-1);
  m.mass.assign(std::size_t(nb + 1), 0.0);
  m.bin_of_cell = (labels < 0).select(nb, labels);
  const Eigen::ArrayXd rho = psiT.density();
  for (Index f = 0; f < labels.size(); ++f) m.mass[std::size_t(m.bin_of_cell(f))] += rho(f) * psiT.grid.dV();
  return m;
}

void assign_weights(WeightedEnsemble& e, const FinalMeasure& m, const DisjointParams& p, Index n_min) {
  std::vector<Index> count(m.mass.size(), 0);
  for (auto& t : e.traj) {
    const std::int32_t c = t.cells.back();
    t.final_bin = t.escaped || c < 0 ? -1 : m.bin_of_cell(c);
    if (t.final_bin >= 0) ++count[std::size_t(t.final_bin)];
  }
  e.underfilled.clear();
  for (std::size_t b = 0; b < m.mass.size(); ++b) {
    if (int(b) == m.residual || !(m.mass[b] > p.eps_branch)) continue;
    if (count[b] == 0) {
      std::ostringstream os;
      os << "bin " << b << " (leaf " << m.leaf_of_bin[b] << ", mass " << m.mass[b]
         << ") has no landing trajectory; widen the proposal velocity box";
      throw CoverageError(os.str());
    }
    if (count[b] < n_min) e.underfilled.push_back(Index(b));
  }
  double total = 0.0;
  for (auto& t : e.traj) {
    t.weight = 0.0;
    if (t.final_bin >= 0 && t.final_bin != m.residual)
      t.weight = m.mass[std::size_t(t.final_bin)] / double(count[std::size_t(t.final_bin)]);
    total += t.weight;
  }
  if (!(total > 0.0)) throw CoverageError("no trajectory carries weight");
  for (auto& t : e.traj) t.weight /= total;
  e.renorm = total;
}

double pushforward_mass(const WeightedEnsemble& e, const Mask& region, Index k) {
  double s = 0.0;
  for (const auto& t : e.traj) {
    const std::int32_t c = t.cells[std::size_t(k)];
    if (c >= 0 && region(c)) s += t.weight;
  }
  return s;
}

Membership branch_membership(const WeightedEnsemble& e, const BranchTree& tree) {
  const SpatialGrid& g = tree.grid;
  Membership m(std::size_t(tree.steps()));
  Eigen::ArrayXi labels(g.size());
  for (Index k = 0; k < tree.steps(); ++k) {
    labels.setConstant(-1);
    for (int id : tree.live(k)) tree.nodes[std::size_t(id)].support(k).paint(g, labels, id);
    auto& row = m[std::size_t(k)];
    row.resize(e.traj.size());
    for (std::size_t t = 0; t < e.traj.size(); ++t) {
      const std::int32_t c = e.traj[t].cells[std::size_t(k)];
      row[t] = c < 0 ? -1 : labels(c);
    }
  }
  return m;
}

std::vector<BornRow> branch_born_report(const WeightedEnsemble& e, const BranchTree& tree, const Membership& m) {
  std::vector<BornRow> rows;
  for (Index k = 0; k < tree.steps(); ++k) {
    std::vector<double> mu(tree.nodes.size(), 0.0);
    for (std::size_t t = 0; t < e.traj.size(); ++t)
      if (m[std::size_t(k)][t] >= 0) mu[std::size_t(m[std::size_t(k)][t])] += e.traj[t].weight;
    for (int id : tree.live(k))
      rows.push_back({id, tree.record_times[std::size_t(k)], mu[std::size_t(id)],
                      tree.nodes[std::size_t(id)].support(k).mass});
  }
  return rows;
}

Lemma1Report lemma1_report(const WeightedEnsemble& e, const BranchTree& tree, const Membership& m) {
  Lemma1Report r;
  for (std::size_t t = 0; t < e.traj.size(); ++t) {
    std::vector<std::pair<int, bool>> visited;  // node, has exited its lineage
    bool sib = false, re = false, out = false;
    for (Index k = 0; k < tree.steps(); ++k) {
      const int n = m[std::size_t(k)][t];
      if (n < 0) out = true;
      bool seen = false;
      for (auto& [a, exited] : visited) {
        const bool in = n >= 0 && tree.descends(a, n);
        if (!in && n >= 0) sib = true;
        if (in && exited) re = true;
        if (!in) exited = true;
        seen = seen || a == n;
      }
      if (n >= 0 && !seen) visited.push_back({n, false});
    }
    const double w = e.traj[t].weight;
    if (sib) r.sibling += w;
    if (re) r.reentry += w;
    if (out) {
      r.outside += w;
      r.outside_unweighted += 1.0;
    }
  }
  r.outside_unweighted /= double(std::max<std::size_t>(1, e.traj.size()));
  return r;
}

double sigma_consistency(const WeightedEnsemble& e, const BranchTree& tree, const Membership& m, int node, Index k) {
  double mu = 0.0;
  for (std::size_t t = 0; t < e.traj.size(); ++t) {
    const int n = m[std::size_t(k)][t];
    if (n >= 0 && tree.descends(node, n)) mu += e.traj[t].weight;
  }
  return std::abs(mu - tree.nodes[std::size_t(node)].support(tree.steps() - 1).mass);
}

}  // namespace hct
