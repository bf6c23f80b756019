#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "hct/types.hpp"

namespace hct {

// Uniform periodic grid; point i sits at lo + i*dx and owns the cell [x - dx/2, x + dx/2).
struct SpatialGrid {
  int dim = 1;
  std::array<Index, 2> n{1, 1};
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  double dx(int a) const { return (hi[a] - lo[a]) / double(n[a]); }
  double dV() const { return dim == 1 ? dx(0) : dx(0) * dx(1); }
  Index size() const { return n[0] * n[1]; }
  double coord(int a, Index i) const { return lo[a] + double(i) * dx(a); }
  Index flat(Index i, Index j = 0) const { return i + n[0] * j; }
  Index cell_of(int a, double x) const;  // -1 when outside
  Index cell_of(const Point& p) const;   // flat index, -1 when outside
  Point point(Index flat_index) const;
  void validate() const;
  bool operator==(const SpatialGrid& o) const {
    return dim == o.dim && n == o.n && lo == o.lo && hi == o.hi;
  }
};

SpatialGrid make_grid(double lo, double hi, Index n);
SpatialGrid make_grid(std::array<double, 2> lo, std::array<double, 2> hi, std::array<Index, 2> n);

struct WaveFunction {
  SpatialGrid grid;
  Eigen::ArrayXcd amps;
  double time = 0.0;

  double norm2() const { return amps.abs2().sum() * grid.dV(); }
  Eigen::ArrayXd density() const { return amps.abs2(); }
};

struct PhysicalParams {
  double hbar = 1.0;
  std::array<double, 2> mass{1.0, 1.0};
  double dt = 1e-3;
  double T = 1.0;

  Index steps() const;
  double stability_bound(const SpatialGrid& g) const;
  void validate(const SpatialGrid& g) const;
};

enum class PotentialKind { Free, Harmonic, Slits, Biprism, Coupling, Tabulated };

struct PotentialTerm {
  PotentialKind kind = PotentialKind::Free;
  int axis = 0;
  double center = 0.0;
  double omega = 0.0;
  double mass = 1.0;
  double strength = 0.0;
  double width = 1.0;
  double separation = 0.0;
  double band = 0.0;
  double band_center = 0.0;
  bool on = true;
  double t_on = -std::numeric_limits<double>::infinity();
  double t_off = std::numeric_limits<double>::infinity();
  Eigen::ArrayXd table;

  bool timed() const { return std::isfinite(t_on) || std::isfinite(t_off); }
  bool active(double t) const { return on && t >= t_on && t < t_off; }
};

struct PotentialSpec {
  std::vector<PotentialTerm> terms;

  bool time_dependent() const;
  unsigned active_set(double t) const;
  void validate(const SpatialGrid& g) const;
};

PotentialSpec free_potential();
PotentialSpec harmonic_potential(double omega, double mass = 1.0, double center = 0.0, int axis = 0);

double potential_at(const PotentialSpec& v, const SpatialGrid& g, const Point& p, double t);
Eigen::ArrayXd sample_potential(const PotentialSpec& v, const SpatialGrid& g, double t);
Eigen::ArrayXd sample_potential(const PotentialSpec& v, const SpatialGrid& g, unsigned active);

WaveFunction init_gaussian(const SpatialGrid& g, const Point& center, const Point& momentum,
                           const Point& sigma, double hbar = 1.0);
WaveFunction init_gaussian(const SpatialGrid& g, double center, double momentum, double sigma,
                           double hbar = 1.0);
void normalize(WaveFunction& psi);

// Strang stepping on a periodic grid: half kinetic, potential at the midpoint time, half kinetic.
class SplitOperator {
 public:
  SplitOperator(const SpatialGrid& g, const PotentialSpec& v, const PhysicalParams& p);
  ~SplitOperator();
  SplitOperator(const SplitOperator&) = delete;
  SplitOperator& operator=(const SplitOperator&) = delete;

  void advance(WaveFunction& psi, Index n_steps);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

WaveFunction evolve(const WaveFunction& psi, const PotentialSpec& v, const PhysicalParams& p,
                    Index n_steps);

WaveFunction project(const WaveFunction& psi, const Mask& region);
double born_mass(const WaveFunction& psi, const Mask& region);
double norm_of(const WaveFunction& psi);
cplx overlap(const WaveFunction& a, const WaveFunction& b);

double mean_position(const WaveFunction& psi, int axis = 0);
double position_width(const WaveFunction& psi, int axis = 0);
double mean_momentum(const WaveFunction& psi, int axis = 0, double hbar = 1.0);
Eigen::ArrayXd wavenumbers(const SpatialGrid& g, int axis);
Eigen::ArrayXcd fft_forward(const WaveFunction& psi);

// Mass in the outermost `cells` cells along every axis.
double edge_mass(const WaveFunction& psi, Index cells);

}  // namespace hct
