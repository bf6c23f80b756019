#include "hct/pathint.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

#include "hct/newtonian.hpp"

namespace hct {

StepKernel build_kernel(const SpatialGrid& g, const PotentialSpec& v, double dt, double hbar, double mass,
                        double eps) {
  if (g.dim != 1) throw ArgumentError("lattice kernels are 1D only");
  if (g.n[0] > 2048) throw ResourceError("lattice kernel limited to n <= 2048");
  if (!(dt > 0.0) || !(hbar > 0.0) || !(mass > 0.0) || eps < 0.0) throw ConfigError("bad kernel parameters");
  StepKernel k{g, v, dt, hbar, mass, eps, Eigen::MatrixXcd(g.n[0], g.n[0])};
  const cplx mt = mass * cplx(1.0, eps);
  const cplx amp = std::sqrt(mt / (2.0 * std::numbers::pi * cplx(0.0, 1.0) * hbar * dt));
  const cplx pref = cplx(0.0, 1.0) / hbar;
  const Index n = g.n[0];
  for (Index c = 0; c < n; ++c) {
    const double x = g.coord(0, c);
    for (Index r = 0; r < n; ++r) {
      const double xp = g.coord(0, r);
      const double d = xp - x;
      const double vm = potential_at(v, g, Point{0.5 * (x + xp), 0.0}, 0.0);
      k.K(r, c) = amp * std::exp(pref * (mt * d * d / (2.0 * dt) - vm * dt));
    }
  }
  if (!k.K.allFinite()) throw ConfigError("lattice kernel is not finite");
  return k;
}

namespace {

void check_constraint(Index n_slices, const std::optional<SliceConstraint>& c, Index n) {
  if (n_slices < 2) throw ArgumentError("n_slices must be >= 2");
  if (c && (c->slice <= 0 || c->slice >= n_slices)) throw ArgumentError("constraint slice out of range");
  if (c && c->region.size() != n) throw ArgumentError("constraint region size mismatch");
}

template <class M>
void apply_region(M& m, const Mask& region) {
  for (Index r = 0; r < m.rows(); ++r)
    if (!region(r)) m.row(r).setZero();
}

}  // namespace

LatticePropagator propagate(const StepKernel& k, Index n_slices, const std::optional<SliceConstraint>& c) {
  check_constraint(n_slices, c, k.grid.n[0]);
  const double dx = k.grid.dx(0);
  Eigen::MatrixXcd m = k.K;
  for (Index s = 1; s < n_slices; ++s) {
    if (c && c->slice == s) apply_region(m, c->region);
    m = (k.K * m) * dx;
  }
  return {0.0, double(n_slices) * k.dt, n_slices, c, std::move(m)};
}

Eigen::VectorXcd propagate_column(const StepKernel& k, Index n_slices, Index i1,
                                  const std::optional<SliceConstraint>& c) {
  check_constraint(n_slices, c, k.grid.n[0]);
  const double dx = k.grid.dx(0);
  Eigen::VectorXcd v = k.K.col(i1);
  for (Index s = 1; s < n_slices; ++s) {
    if (c && c->slice == s) apply_region(v, c->region);
    v = (k.K * v) * dx;
  }
  return v;
}

std::vector<std::pair<double, double>> mask_intervals(const SpatialGrid& g, const Mask& m) {
  std::vector<std::pair<double, double>> out;
  const double h = 0.5 * g.dx(0);
  Index i = 0;
  while (i < m.size()) {
    if (!m(i)) {
      ++i;
      continue;
    }
    Index e = i;
    while (e + 1 < m.size() && m(e + 1)) ++e;
    out.push_back({g.coord(0, i) - h, g.coord(0, e) + h});
    i = e + 1;
  }
  return out;
}

Mask interval_mask(const SpatialGrid& g, double a, double b) {
  Mask m(g.n[0]);
  for (Index i = 0; i < g.n[0]; ++i) {
    const double x = g.coord(0, i);
    m(i) = x >= a && x <= b;
  }
  return m;
}

ShotPath shoot_classical(const StepKernel& k, Index n_slices, double x1, double x3, Index substeps) {
  const double T = double(n_slices) * k.dt;
  const double h = k.dt / double(substeps);
  const double fd = 1e-5;
  auto force = [&](const Point& x, double, Point& f) {
    const double vp = potential_at(k.potential, k.grid, Point{x[0] + fd, 0.0}, 0.0);
    const double vm = potential_at(k.potential, k.grid, Point{x[0] - fd, 0.0}, 0.0);
    f = {-(vp - vm) / (2.0 * fd * k.mass), 0.0};
    return std::isfinite(f[0]);
  };
  auto land = [&](double v0, std::vector<double>* path) {
    VerletState s{{x1, 0.0}, {v0, 0.0}};
    if (path) path->assign(1, x1);
    verlet(s, force, 0.0, h, n_slices * substeps, 1, [&](Index i, const VerletState& st) {
      if (path && i % substeps == 0) path->push_back(st.x[0]);
    });
    return s.x[0] - x3;
  };
  ShotPath out;
  const double vl = (x3 - x1) / T;
  double span = std::max(1.0, std::abs(vl));
  double lo = vl - span, hi = vl + span;
  double flo = land(lo, nullptr), fhi = land(hi, nullptr);
  for (int it = 0; it < 40 && !(flo < 0.0 && fhi > 0.0); ++it) {
    span *= 2.0;
    lo = vl - span;
    hi = vl + span;
    flo = land(lo, nullptr);
    fhi = land(hi, nullptr);
  }
  if (!(flo < 0.0 && fhi > 0.0)) return out;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (land(mid, nullptr) < 0.0 ? lo : hi) = mid;
  }
  out.found = true;
  out.v0 = 0.5 * (lo + hi);
  land(out.v0, &out.x);
  return out;
}

double fresnel_width(const StepKernel& k, Index t2_slice, Index n_slices) {
  const double t21 = double(t2_slice) * k.dt, t32 = double(n_slices - t2_slice) * k.dt;
  return std::sqrt(k.hbar * t21 * t32 / (k.mass * (t21 + t32)));
}

Conjecture1Report conjecture1_test(const StepKernel& k, Index n_slices, Index t2_slice, const Mask& S2, Index i1,
                                   Index i3) {
  Conjecture1Report r;
  r.x1 = k.grid.coord(0, i1);
  r.x3 = k.grid.coord(0, i3);
  r.K = propagate_column(k, n_slices, i1)(i3);
  r.Kp = propagate_column(k, n_slices, i1, SliceConstraint{t2_slice, S2})(i3);
  r.ratio = std::abs(r.Kp / r.K);
  r.deviation = std::abs(r.Kp / r.K - 1.0);
  const ShotPath sp = shoot_classical(k, n_slices, r.x1, r.x3);
  r.shot = sp.found;
  if (!sp.found) return r;
  r.path = sp.x;
  r.x2 = sp.x[std::size_t(t2_slice)];
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : mask_intervals(k.grid, S2)) {
    if (r.x2 >= a && r.x2 < b) r.classical_hit = true;
    dist = std::min({dist, std::abs(r.x2 - a), std::abs(r.x2 - b)});
  }
  r.margin = dist / fresnel_width(k, t2_slice, n_slices);
  return r;
}

std::vector<SweepRow> margin_sweep(const StepKernel& k, Index n_slices, Index t2_slice, Index i1, Index i3,
                                   const std::vector<double>& margins) {
  check_constraint(n_slices, SliceConstraint{t2_slice, Mask::Constant(k.grid.n[0], true)}, k.grid.n[0]);
  const ShotPath sp = shoot_classical(k, n_slices, k.grid.coord(0, i1), k.grid.coord(0, i3));
  if (!sp.found) throw ArgumentError("no classical path between the endpoints");
  const double x2 = sp.x[std::size_t(t2_slice)];
  const double w = fresnel_width(k, t2_slice, n_slices);
  const double dx = k.grid.dx(0);
  Eigen::VectorXcd mid = k.K.col(i1);
  for (Index s = 1; s < t2_slice; ++s) mid = (k.K * mid) * dx;
  auto finish = [&](Eigen::VectorXcd v) {
    for (Index s = t2_slice; s < n_slices; ++s) v = (k.K * v) * dx;
    return v(i3);
  };
  const cplx K = finish(mid);
  std::vector<SweepRow> rows;
  for (double m : margins) {
    const Mask in = interval_mask(k.grid, x2 - m * w, x2 + m * w);
    Eigen::VectorXcd a = mid, b = mid;
    apply_region(a, in);
    apply_region(b, Mask(!in));
    rows.push_back({m, std::abs(finish(a) / K - 1.0), std::abs(finish(b) / K)});
  }
  return rows;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("spearman needs paired samples");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t q = i; q <= j; ++q) r[idx[q]] = 0.5 * double(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = double(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace hct
