#include "hct/qdyn.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

namespace hct {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double other_coord(const Point& p, int axis) { return p[axis == 0 ? 1 : 0]; }

double term_value(const PotentialTerm& term, const SpatialGrid& g, const Point& p) {
  const double x = p[term.axis];
  switch (term.kind) {
    case PotentialKind::Free:
      return 0.0;
    case PotentialKind::Harmonic: {
      const double d = x - term.center;
      return 0.5 * term.mass * term.omega * term.omega * d * d;
    }
    case PotentialKind::Slits: {
      if (g.dim == 2 && std::abs(other_coord(p, term.axis) - term.band_center) > term.band) return 0.0;
      const double a = std::abs(x - (term.center - 0.5 * term.separation));
      const double b = std::abs(x - (term.center + 0.5 * term.separation));
      return (a <= 0.5 * term.width || b <= 0.5 * term.width) ? 0.0 : term.strength;
    }
    case PotentialKind::Biprism: {
      const double span = term.t_off - term.t_on;
      const double amp = std::isfinite(span) && span > 0.0 ? term.strength / span : term.strength;
      return amp * term.width * log_cosh((x - term.center) / term.width);
    }
    case PotentialKind::Coupling:
      return -term.strength * std::tanh((x - term.center) / term.width) * other_coord(p, term.axis);
    case PotentialKind::Tabulated: {
      const double fx = (p[0] - g.lo[0]) / g.dx(0);
      const Index i = std::clamp<Index>(Index(std::floor(fx)), 0, g.n[0] - 2);
      const double a = std::clamp(fx - double(i), 0.0, 1.0);
      if (g.dim == 1) return term.table(i) * (1.0 - a) + term.table(i + 1) * a;
      const double fy = (p[1] - g.lo[1]) / g.dx(1);
      const Index j = std::clamp<Index>(Index(std::floor(fy)), 0, g.n[1] - 2);
      const double b = std::clamp(fy - double(j), 0.0, 1.0);
      return term.table(g.flat(i, j)) * (1 - a) * (1 - b) + term.table(g.flat(i + 1, j)) * a * (1 - b) +
             term.table(g.flat(i, j + 1)) * (1 - a) * b + term.table(g.flat(i + 1, j + 1)) * a * b;
    }
  }
  return 0.0;
}

Eigen::ArrayXd sample_term(const PotentialTerm& term, const SpatialGrid& g) {
  if (term.kind == PotentialKind::Tabulated) return term.table;
  Eigen::ArrayXd out(g.size());
  for (Index f = 0; f < g.size(); ++f) out(f) = term_value(term, g, g.point(f));
  return out;
}

}  // namespace

Index SpatialGrid::cell_of(int a, double x) const {
  const double f = std::floor((x - lo[a]) / dx(a) + 0.5);
  if (!(f >= 0.0) || f >= double(n[a])) return -1;
  return Index(f);
}

Index SpatialGrid::cell_of(const Point& p) const {
  const Index i = cell_of(0, p[0]);
  if (i < 0) return -1;
  if (dim == 1) return i;
  const Index j = cell_of(1, p[1]);
  return j < 0 ? -1 : flat(i, j);
}

Point SpatialGrid::point(Index f) const {
  const Index i = f % n[0];
  const Index j = f / n[0];
  return {coord(0, i), dim == 2 ? coord(1, j) : 0.0};
}

void SpatialGrid::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("grid dim must be 1 or 2");
  for (int a = 0; a < dim; ++a) {
    if (n[a] < 16 || !is_pow2(n[a]))
      throw ConfigError("grid n per axis must be a power of two >= 16");
    if (!(hi[a] > lo[a])) throw ConfigError("grid extent must satisfy lo < hi");
  }
  if (dim == 1 && n[1] != 1) throw ConfigError("1D grid must have n[1] = 1");
  if (size() > (Index(1) << 22)) throw ConfigError("grid exceeds 2^22 points");
}

SpatialGrid make_grid(double lo, double hi, Index n) {
  SpatialGrid g;
  g.dim = 1;
  g.n = {n, 1};
  g.lo = {lo, 0.0};
  g.hi = {hi, 1.0};
  g.validate();
  return g;
}

SpatialGrid make_grid(std::array<double, 2> lo, std::array<double, 2> hi, std::array<Index, 2> n) {
  SpatialGrid g;
  g.dim = 2;
  g.n = n;
  g.lo = lo;
  g.hi = hi;
  g.validate();
  return g;
}

Index PhysicalParams::steps() const { return Index(std::llround(T / dt)); }

double PhysicalParams::stability_bound(const SpatialGrid& g) const {
  double b = std::numeric_limits<double>::infinity();
  for (int a = 0; a < g.dim; ++a) b = std::min(b, mass[a] * g.dx(a) * g.dx(a) / hbar);
  return b;
}

void PhysicalParams::validate(const SpatialGrid& g) const {
  if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
  for (int a = 0; a < g.dim; ++a)
    if (!(mass[a] > 0.0)) throw ConfigError("mass must be positive");
  if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("dt and T must be positive");
  if (dt > 0.1 * stability_bound(g) * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "dt = " << dt << " violates dt <= 0.1*m*dx^2/hbar = " << 0.1 * stability_bound(g);
    throw ConfigError(os.str());
  }
  const double r = T / dt;
  if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r))
    throw ConfigError("T must be an integer multiple of dt");
}

bool PotentialSpec::time_dependent() const {
  for (const auto& t : terms)
    if (t.timed()) return true;
  return false;
}

unsigned PotentialSpec::active_set(double t) const {
  unsigned s = 0;
  for (std::size_t k = 0; k < terms.size(); ++k)
    if (terms[k].active(t)) s |= 1u << k;
  return s;
}

void PotentialSpec::validate(const SpatialGrid& g) const {
  if (terms.size() > 32) throw ConfigError("at most 32 potential terms");
  for (const auto& t : terms) {
    if (t.axis < 0 || t.axis >= g.dim) throw ConfigError("potential axis out of range");
    if (t.t_off < t.t_on) throw ConfigError("activation window requires t_on <= t_off");
    switch (t.kind) {
      case PotentialKind::Coupling:
        if (g.dim != 2) throw ConfigError("von-neumann coupling needs a 2D grid");
        [[fallthrough]];
      case PotentialKind::Biprism:
        if (!(t.width > 0.0)) throw ConfigError("potential width must be positive");
        break;
      case PotentialKind::Slits:
        if (!(t.width > 0.0) || t.separation < 0.0) throw ConfigError("bad slit geometry");
        break;
      case PotentialKind::Tabulated:
        if (t.table.size() != g.size()) throw ConfigError("tabulated potential size mismatch");
        break;
      default:
        break;
    }
    if (!sample_term(t, g).isFinite().all()) throw ConfigError("potential is not finite on the grid");
  }
}

PotentialSpec free_potential() { return {}; }

PotentialSpec harmonic_potential(double omega, double mass, double center, int axis) {
  PotentialTerm t;
  t.kind = PotentialKind::Harmonic;
  t.omega = omega;
  t.mass = mass;
  t.center = center;
  t.axis = axis;
  return PotentialSpec{{t}};
}

double potential_at(const PotentialSpec& v, const SpatialGrid& g, const Point& p, double t) {
  double s = 0.0;
  for (const auto& term : v.terms)
    if (term.active(t)) s += term_value(term, g, p);
  return s;
}

Eigen::ArrayXd sample_potential(const PotentialSpec& v, const SpatialGrid& g, unsigned active) {
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(g.size());
  for (std::size_t k = 0; k < v.terms.size(); ++k)
    if (active & (1u << k)) out += sample_term(v.terms[k], g);
  return out;
}

Eigen::ArrayXd sample_potential(const PotentialSpec& v, const SpatialGrid& g, double t) {
  return sample_potential(v, g, v.active_set(t));
}

WaveFunction init_gaussian(const SpatialGrid& g, const Point& center, const Point& momentum,
                           const Point& sigma, double hbar) {
  for (int a = 0; a < g.dim; ++a) {
    if (sigma[a] < 3.0 * g.dx(a)) throw ResolutionError("packet width below 3 grid cells");
    const double s2 = std::sqrt(2.0) * sigma[a];
    const double out = 0.5 * std::erfc((center[a] - g.lo[a]) / s2) +
                       0.5 * std::erfc((g.hi[a] - g.dx(a) - center[a]) / s2);
    if (out >= 1e-8) throw DomainError("packet mass outside the grid exceeds 1e-8");
  }
  WaveFunction psi{g, Eigen::ArrayXcd(g.size()), 0.0};
  for (Index f = 0; f < g.size(); ++f) {
    const Point p = g.point(f);
    double re = 0.0, ph = 0.0;
    for (int a = 0; a < g.dim; ++a) {
      const double d = p[a] - center[a];
      re -= d * d / (4.0 * sigma[a] * sigma[a]);
      ph += momentum[a] * p[a] / hbar;
    }
    psi.amps(f) = std::exp(cplx(re, ph));
  }
  normalize(psi);
  return psi;
}

WaveFunction init_gaussian(const SpatialGrid& g, double center, double momentum, double sigma,
                           double hbar) {
  return init_gaussian(g, Point{center, 0.0}, Point{momentum, 0.0}, Point{sigma, 1.0}, hbar);
}

void normalize(WaveFunction& psi) {
  const double n2 = psi.norm2();
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw DegenerateStateError("cannot normalize a zero state");
  psi.amps /= std::sqrt(n2);
}

Eigen::ArrayXd wavenumbers(const SpatialGrid& g, int axis) {
  const Index n = g.n[axis];
  Eigen::ArrayXd k(n);
  const double f = 2.0 * std::numbers::pi / (double(n) * g.dx(axis));
  for (Index i = 0; i < n; ++i) k(i) = f * double(i < n / 2 ? i : i - n);
  return k;
}

struct SplitOperator::Impl {
  SpatialGrid grid;
  PotentialSpec pot;
  PhysicalParams par;
  fftw_complex* buf = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  Eigen::ArrayXcd half_kin, full_kin;
  std::map<unsigned, Eigen::ArrayXcd> phases;

  Impl(const SpatialGrid& g, const PotentialSpec& v, const PhysicalParams& p) : grid(g), pot(v), par(p) {
    grid.validate();
    par.validate(grid);
    pot.validate(grid);
    const Index n = grid.size();
    buf = fftw_alloc_complex(std::size_t(n));
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      if (grid.dim == 1) {
        fwd = fftw_plan_dft_1d(int(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(int(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
      } else {
        fwd = fftw_plan_dft_2d(int(grid.n[1]), int(grid.n[0]), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_2d(int(grid.n[1]), int(grid.n[0]), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
      }
    }
    Eigen::ArrayXd e = Eigen::ArrayXd::Zero(n);
    const Eigen::ArrayXd k0 = wavenumbers(grid, 0);
    const Eigen::ArrayXd k1 = grid.dim == 2 ? wavenumbers(grid, 1) : Eigen::ArrayXd::Zero(1);
    for (Index f = 0; f < n; ++f) {
      const Index i = f % grid.n[0], j = f / grid.n[0];
      e(f) = par.hbar * k0(i) * k0(i) / (2.0 * par.mass[0]);
      if (grid.dim == 2) e(f) += par.hbar * k1(j) * k1(j) / (2.0 * par.mass[1]);
    }
    const double inv_n = 1.0 / double(n);
    half_kin = (cplx(0, -0.5 * par.dt) * e.cast<cplx>()).exp() * inv_n;
    full_kin = (cplx(0, -par.dt) * e.cast<cplx>()).exp() * inv_n;
  }

  ~Impl() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (buf) fftw_free(buf);
  }

  Eigen::Map<Eigen::ArrayXcd> view() {
    return Eigen::Map<Eigen::ArrayXcd>(reinterpret_cast<cplx*>(buf), grid.size());
  }

  void kinetic(const Eigen::ArrayXcd& factor) {
    fftw_execute(fwd);
    view() *= factor;
    fftw_execute(bwd);
  }

  const Eigen::ArrayXcd* phase(unsigned active) {
    if (active == 0) return nullptr;
    auto it = phases.find(active);
    if (it == phases.end()) {
      const Eigen::ArrayXd v = sample_potential(pot, grid, active);
      Eigen::ArrayXcd ph = (cplx(0, -par.dt / par.hbar) * v.cast<cplx>()).exp();
      it = phases.emplace(active, std::move(ph)).first;
    }
    return &it->second;
  }
};

SplitOperator::SplitOperator(const SpatialGrid& g, const PotentialSpec& v, const PhysicalParams& p)
    : impl_(std::make_unique<Impl>(g, v, p)) {}

SplitOperator::~SplitOperator() = default;

void SplitOperator::advance(WaveFunction& psi, Index n_steps) {
  if (n_steps < 1) throw ArgumentError("n_steps must be >= 1");
  if (!(psi.grid == impl_->grid)) throw ArgumentError("wave function grid does not match propagator");
  auto& im = *impl_;
  auto v = im.view();
  v = psi.amps;
  const double t0 = psi.time;
  im.kinetic(im.half_kin);
  for (Index s = 0; s < n_steps; ++s) {
    const double tm = t0 + (double(s) + 0.5) * im.par.dt;
    if (const auto* ph = im.phase(im.pot.active_set(tm))) v *= *ph;
    im.kinetic(s + 1 < n_steps ? im.full_kin : im.half_kin);
  }
  psi.amps = v;
  psi.time = t0 + double(n_steps) * im.par.dt;
}

WaveFunction evolve(const WaveFunction& psi, const PotentialSpec& v, const PhysicalParams& p,
                    Index n_steps) {
  SplitOperator op(psi.grid, v, p);
  WaveFunction out = psi;
  op.advance(out, n_steps);
  return out;
}

WaveFunction project(const WaveFunction& psi, const Mask& region) {
  if (region.size() != psi.amps.size()) throw ArgumentError("region size mismatch");
  WaveFunction out = psi;
  out.amps = region.select(psi.amps, cplx(0.0, 0.0));
  return out;
}

double born_mass(const WaveFunction& psi, const Mask& region) {
  if (region.size() != psi.amps.size()) throw ArgumentError("region size mismatch");
  return region.select(psi.amps.abs2(), 0.0).sum() * psi.grid.dV();
}

double norm_of(const WaveFunction& psi) { return std::sqrt(psi.norm2()); }

cplx overlap(const WaveFunction& a, const WaveFunction& b) {
  return (a.amps.conjugate() * b.amps).sum() * a.grid.dV();
}

double mean_position(const WaveFunction& psi, int axis) {
  const Eigen::ArrayXd rho = psi.density();
  double s = 0.0, w = 0.0;
  for (Index f = 0; f < rho.size(); ++f) {
    s += rho(f) * psi.grid.point(f)[axis];
    w += rho(f);
  }
  return s / w;
}

double position_width(const WaveFunction& psi, int axis) {
  const Eigen::ArrayXd rho = psi.density();
  const double m = mean_position(psi, axis);
  double s = 0.0, w = 0.0;
  for (Index f = 0; f < rho.size(); ++f) {
    const double d = psi.grid.point(f)[axis] - m;
    s += rho(f) * d * d;
    w += rho(f);
  }
  return std::sqrt(s / w);
}

Eigen::ArrayXcd fft_forward(const WaveFunction& psi) {
  const SpatialGrid& g = psi.grid;
  fftw_complex* buf = fftw_alloc_complex(std::size_t(g.size()));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = g.dim == 1 ? fftw_plan_dft_1d(int(g.n[0]), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE)
                      : fftw_plan_dft_2d(int(g.n[1]), int(g.n[0]), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  Eigen::Map<Eigen::ArrayXcd> v(reinterpret_cast<cplx*>(buf), g.size());
  v = psi.amps;
  fftw_execute(plan);
  Eigen::ArrayXcd out = v;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(buf);
  }
  return out;
}

double mean_momentum(const WaveFunction& psi, int axis, double hbar) {
  const Eigen::ArrayXd p = fft_forward(psi).abs2();
  const Eigen::ArrayXd k = wavenumbers(psi.grid, axis);
  double s = 0.0;
  for (Index f = 0; f < p.size(); ++f) {
    const Index i = axis == 0 ? f % psi.grid.n[0] : f / psi.grid.n[0];
    s += p(f) * k(i);
  }
  return hbar * s / p.sum();
}

double edge_mass(const WaveFunction& psi, Index cells) {
  const SpatialGrid& g = psi.grid;
  const Eigen::ArrayXd rho = psi.density();
  double s = 0.0;
  for (Index f = 0; f < g.size(); ++f) {
    const Index i = f % g.n[0], j = f / g.n[0];
    bool edge = i < cells || i >= g.n[0] - cells;
    if (g.dim == 2) edge = edge || j < cells || j >= g.n[1] - cells;
    if (edge) s += rho(f);
  }
  return s * g.dV();
}

}  // namespace hct
