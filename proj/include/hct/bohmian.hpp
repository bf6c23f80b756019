#pragma once

#include <cstdint>
#include <vector>

#include "hct/qdyn.hpp"

namespace hct {

std::uint64_t splitmix64(std::uint64_t master, std::uint64_t stream);

// Cell-wise inverse CDF with uniform jitter inside the chosen cell; sample i uses its own stream.
std::vector<Point> sample_density(const SpatialGrid& g, const Eigen::ArrayXd& weight, Index n,
                                  std::uint64_t seed);
std::vector<Point> sample_born(const WaveFunction& psi, Index n, std::uint64_t seed);

// Guidance velocity on grid points from the phase difference of neighbours.
struct VelocityGrid {
  SpatialGrid grid;
  std::array<Eigen::ArrayXd, 2> v;
  Eigen::ArrayXd rho;
  double floor = 0.0;
};

VelocityGrid velocity_grid(const WaveFunction& psi, const PhysicalParams& p, double node_floor_rel = 1e-12);

// Bilinear lookup; returns false at a node (some corner below the floor) or off the grid interior.
bool velocity_at(const VelocityGrid& vg, const Point& x, Point& v);
Point velocity_field(const WaveFunction& psi, const Point& x, const PhysicalParams& p);

struct GuidedTrajectory {
  std::vector<Point> samples;
  Point x0{0.0, 0.0};
  Index node_events = 0;
  bool escaped = false;
};

struct GuidedEnsemble {
  std::vector<GuidedTrajectory> traj;
  std::vector<double> record_times;
  Index steps = 0;
  Index node_events = 0;
  Index escaped = 0;
};

// RK2 midpoint co-evolved with the split-operator; the half-step field uses (psi_n + psi_{n+1})/2.
GuidedEnsemble integrate_guided(const WaveFunction& psi0, const PotentialSpec& v, const PhysicalParams& p,
                                const std::vector<Point>& x0, Index record_every,
                                double node_floor_rel = 1e-12);
GuidedTrajectory integrate_guided(const WaveFunction& psi0, const PotentialSpec& v, const PhysicalParams& p,
                                  const Point& x0, Index record_every);

// Cell-aligned bins spanning the cells above `support_floor` along axis 0; one extra bin for the rest.
struct DensityBins {
  Eigen::ArrayXi bin_of_cell;
  Index n_bins = 0;
};
DensityBins support_bins(const WaveFunction& psi, Index n_bins, double support_floor = 1e-8);

double equivariance_distance(const std::vector<Point>& positions, const WaveFunction& psi, Index n_bins);
double equivariance_distance(const std::vector<Point>& positions, const WaveFunction& psi,
                             const DensityBins& bins);

// Fraction of trajectory pairs whose 1D order differs between the first and last samples.
double inversion_fraction(const GuidedEnsemble& e);

}  // namespace hct
