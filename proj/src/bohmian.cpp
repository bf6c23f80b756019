#include "hct/bohmian.hpp"

#include <algorithm>
#include <random>

namespace hct {

namespace {

double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

bool interior(const SpatialGrid& g, const Point& x) {
  for (int a = 0; a < g.dim; ++a) {
    const double f = (x[a] - g.lo[a]) / g.dx(a);
    if (!(f >= 1.0) || !(f <= double(g.n[a] - 2))) return false;
  }
  return true;
}

std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo,
                               std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = (lo + hi) / 2;
  std::uint64_t c = count_inversions(v, tmp, lo, mid) + count_inversions(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      c += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + long(lo), tmp.begin() + long(hi), v.begin() + long(lo));
  return c;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + (stream + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<Point> sample_density(const SpatialGrid& g, const Eigen::ArrayXd& weight, Index n,
                                  std::uint64_t seed) {
  if (weight.size() != g.size()) throw ArgumentError("weight size mismatch");
  std::vector<double> cdf(std::size_t(weight.size()));
  double acc = 0.0;
  for (Index f = 0; f < weight.size(); ++f) cdf[std::size_t(f)] = acc += std::max(weight(f), 0.0);
  if (!(acc > 0.0)) throw DegenerateStateError("sampling weight is zero");
  std::vector<Point> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    std::mt19937_64 rng(splitmix64(seed, std::uint64_t(i)));
    const double u = uniform01(rng) * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const Index f = std::min<Index>(Index(it - cdf.begin()), g.size() - 1);
    Point p = g.point(f);
    for (int a = 0; a < g.dim; ++a) p[a] += (uniform01(rng) - 0.5) * g.dx(a);
    out[std::size_t(i)] = p;
  }
  return out;
}

std::vector<Point> sample_born(const WaveFunction& psi, Index n, std::uint64_t seed) {
  return sample_density(psi.grid, psi.density(), n, seed);
}

VelocityGrid velocity_grid(const WaveFunction& psi, const PhysicalParams& p, double node_floor_rel) {
  const SpatialGrid& g = psi.grid;
  VelocityGrid vg;
  vg.grid = g;
  vg.rho = psi.density();
  vg.floor = node_floor_rel * vg.rho.maxCoeff();
  for (int a = 0; a < 2; ++a) vg.v[a] = Eigen::ArrayXd::Zero(g.size());
  for (int a = 0; a < g.dim; ++a) {
    const double c = p.hbar / (p.mass[a] * 2.0 * g.dx(a));
    const Index n = g.n[a];
    for (Index f = 0; f < g.size(); ++f) {
      const Index i = a == 0 ? f % g.n[0] : f / g.n[0];
      const Index step = a == 0 ? 1 : g.n[0];
      const Index up = i + 1 < n ? f + step : f - (n - 1) * step;
      const Index dn = i > 0 ? f - step : f + (n - 1) * step;
      vg.v[a](f) = c * std::arg(psi.amps(up) * std::conj(psi.amps(dn)));
    }
  }
  return vg;
}

bool velocity_at(const VelocityGrid& vg, const Point& x, Point& v) {
  const SpatialGrid& g = vg.grid;
  if (!interior(g, x)) return false;
  const double fx = (x[0] - g.lo[0]) / g.dx(0);
  const Index i = std::min<Index>(Index(fx), g.n[0] - 2);
  const double a = fx - double(i);
  if (g.dim == 1) {
    if (vg.rho(i) < vg.floor || vg.rho(i + 1) < vg.floor) return false;
    v = {vg.v[0](i) * (1 - a) + vg.v[0](i + 1) * a, 0.0};
    return true;
  }
  const double fy = (x[1] - g.lo[1]) / g.dx(1);
  const Index j = std::min<Index>(Index(fy), g.n[1] - 2);
  const double b = fy - double(j);
  const Index c00 = g.flat(i, j), c10 = g.flat(i + 1, j), c01 = g.flat(i, j + 1), c11 = g.flat(i + 1, j + 1);
  if (vg.rho(c00) < vg.floor || vg.rho(c10) < vg.floor || vg.rho(c01) < vg.floor || vg.rho(c11) < vg.floor)
    return false;
  for (int d = 0; d < 2; ++d)
    v[d] = vg.v[d](c00) * (1 - a) * (1 - b) + vg.v[d](c10) * a * (1 - b) + vg.v[d](c01) * (1 - a) * b +
           vg.v[d](c11) * a * b;
  return true;
}

Point velocity_field(const WaveFunction& psi, const Point& x, const PhysicalParams& p) {
  Point v{0.0, 0.0};
  velocity_at(velocity_grid(psi, p), x, v);
  return v;
}

GuidedEnsemble integrate_guided(const WaveFunction& psi0, const PotentialSpec& pot, const PhysicalParams& p,
                                const std::vector<Point>& x0, Index record_every, double node_floor_rel) {
  const SpatialGrid& g = psi0.grid;
  const Index steps = p.steps();
  if (record_every < 1 || steps % record_every != 0)
    throw ConfigError("record cadence must divide the step count");
  SplitOperator op(g, pot, p);
  GuidedEnsemble e;
  e.steps = steps;
  const std::size_t n = x0.size();
  e.traj.resize(n);
  std::vector<Point> x = x0, last(n, Point{0.0, 0.0});
  std::vector<Index> events(n, 0);
  std::vector<char> esc(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    e.traj[t].x0 = x0[t];
    e.traj[t].samples.reserve(std::size_t(steps / record_every + 1));
    e.traj[t].samples.push_back(x0[t]);
    esc[t] = !interior(g, x0[t]);
  }
  e.record_times.push_back(psi0.time);

  WaveFunction psi = psi0;
  VelocityGrid vn = velocity_grid(psi, p, node_floor_rel);
  const double dt = p.dt;
  for (Index s = 0; s < steps; ++s) {
    WaveFunction next = psi;
    op.advance(next, 1);
    WaveFunction mid = psi;
    mid.amps = 0.5 * (psi.amps + next.amps);
    const VelocityGrid vm = velocity_grid(mid, p, node_floor_rel);
#pragma omp parallel for schedule(static)
    for (std::size_t t = 0; t < n; ++t) {
      if (esc[t]) continue;
      Point v1, v2;
      if (!velocity_at(vn, x[t], v1)) {
        v1 = last[t];
        ++events[t];
      }
      Point xm = x[t];
      for (int a = 0; a < g.dim; ++a) xm[a] += 0.5 * dt * v1[a];
      if (!interior(g, xm)) {
        esc[t] = 1;
        continue;
      }
      if (!velocity_at(vm, xm, v2)) {
        v2 = v1;
        ++events[t];
      }
      for (int a = 0; a < g.dim; ++a) x[t][a] += dt * v2[a];
      last[t] = v2;
      if (!interior(g, x[t])) esc[t] = 1;
    }
    psi = std::move(next);
    vn = velocity_grid(psi, p, node_floor_rel);
    if ((s + 1) % record_every == 0) {
      e.record_times.push_back(psi.time);
      for (std::size_t t = 0; t < n; ++t) e.traj[t].samples.push_back(x[t]);
    }
  }
  for (std::size_t t = 0; t < n; ++t) {
    e.traj[t].node_events = events[t];
    e.traj[t].escaped = esc[t] != 0;
    e.node_events += events[t];
    e.escaped += esc[t] ? 1 : 0;
  }
  return e;
}

GuidedTrajectory integrate_guided(const WaveFunction& psi0, const PotentialSpec& v, const PhysicalParams& p,
                                  const Point& x0, Index record_every) {
  return integrate_guided(psi0, v, p, std::vector<Point>{x0}, record_every).traj.front();
}

DensityBins support_bins(const WaveFunction& psi, Index n_bins, double support_floor) {
  const SpatialGrid& g = psi.grid;
  const Eigen::ArrayXd rho = psi.density();
  Eigen::ArrayXd col = Eigen::ArrayXd::Zero(g.n[0]);
  for (Index f = 0; f < g.size(); ++f) col(f % g.n[0]) = std::max(col(f % g.n[0]), rho(f));
  Index lo = -1, hi = -1;
  for (Index i = 0; i < g.n[0]; ++i)
    if (col(i) > support_floor) {
      if (lo < 0) lo = i;
      hi = i;
    }
  if (lo < 0) throw DegenerateStateError("no cell above the support floor");
  const Index w = hi - lo + 1;
  DensityBins b;
  b.n_bins = std::min(n_bins, w);
  b.bin_of_cell.resize(g.size());
  for (Index f = 0; f < g.size(); ++f) {
    const Index i = f % g.n[0];
    b.bin_of_cell(f) = i < lo || i > hi ? int(b.n_bins) : int((i - lo) * b.n_bins / w);
  }
  return b;
}

double equivariance_distance(const std::vector<Point>& positions, const WaveFunction& psi,
                             const DensityBins& bins) {
  if (positions.size() < 1000) throw StatisticsError("equivariance needs at least 1000 trajectories");
  const SpatialGrid& g = psi.grid;
  Eigen::ArrayXd born = Eigen::ArrayXd::Zero(bins.n_bins + 1);
  Eigen::ArrayXd emp = Eigen::ArrayXd::Zero(bins.n_bins + 1);
  const Eigen::ArrayXd rho = psi.density();
  for (Index f = 0; f < g.size(); ++f) born(bins.bin_of_cell(f)) += rho(f) * g.dV();
  for (const Point& x : positions) {
    const Index c = g.cell_of(x);
    emp(c < 0 ? bins.n_bins : bins.bin_of_cell(c)) += 1.0;
  }
  emp /= double(positions.size());
  return 0.5 * (emp - born).abs().sum();
}

double equivariance_distance(const std::vector<Point>& positions, const WaveFunction& psi, Index n_bins) {
  return equivariance_distance(positions, psi, support_bins(psi, n_bins));
}

double inversion_fraction(const GuidedEnsemble& e) {
  std::vector<std::pair<double, double>> ends;
  for (const auto& t : e.traj)
    if (!t.escaped) ends.push_back({t.samples.front()[0], t.samples.back()[0]});
  if (ends.size() < 2) return 0.0;
  std::sort(ends.begin(), ends.end());
  std::vector<double> v(ends.size()), tmp(ends.size());
  for (std::size_t i = 0; i < ends.size(); ++i) v[i] = ends[i].second;
  const double pairs = 0.5 * double(ends.size()) * double(ends.size() - 1);
  return double(count_inversions(v, tmp, 0, v.size())) / pairs;
}

}  // namespace hct
