#pragma once

#include <optional>
#include <vector>

#include "hct/qdyn.hpp"

namespace hct {

// One-slice kernel K[x', x] with complex mass m(1 + i eps); eps = 0 gives the bare real-time kernel.
struct StepKernel {
  SpatialGrid grid;
  PotentialSpec potential;
  double dt = 0.0;
  double hbar = 1.0;
  double mass = 1.0;
  double eps = 0.0;
  Eigen::MatrixXcd K;
};

StepKernel build_kernel(const SpatialGrid& g, const PotentialSpec& v, double dt, double hbar = 1.0,
                        double mass = 1.0, double eps = 0.0);

struct SliceConstraint {
  Index slice = 0;  // number of kernel steps before the projector
  Mask region;
};

struct LatticePropagator {
  double t1 = 0.0, t3 = 0.0;
  Index n_slices = 0;
  std::optional<SliceConstraint> constraint;
  Eigen::MatrixXcd K;
};

LatticePropagator propagate(const StepKernel& k, Index n_slices,
                            const std::optional<SliceConstraint>& c = std::nullopt);

// Column x1 of the propagator without forming the matrix product.
Eigen::VectorXcd propagate_column(const StepKernel& k, Index n_slices, Index i1,
                                  const std::optional<SliceConstraint>& c = std::nullopt);

// Intervals [a, b] covered by the cells of a 1D mask.
std::vector<std::pair<double, double>> mask_intervals(const SpatialGrid& g, const Mask& m);
Mask interval_mask(const SpatialGrid& g, double a, double b);

struct ShotPath {
  bool found = false;
  double v0 = 0.0;
  std::vector<double> x;  // position at each slice
};

// Bisection on the initial velocity with fine Verlet steps under the kernel's potential.
ShotPath shoot_classical(const StepKernel& k, Index n_slices, double x1, double x3, Index substeps = 64);

double fresnel_width(const StepKernel& k, Index t2_slice, Index n_slices);

struct Conjecture1Report {
  double x1 = 0.0, x3 = 0.0;
  cplx K{0.0, 0.0}, Kp{0.0, 0.0};
  double ratio = 0.0;  // |K'/K|
  double deviation = 0.0;  // |K'/K - 1|
  bool shot = false;
  bool classical_hit = false;
  double x2 = 0.0;
  double margin = 0.0;  // distance to the region boundary in Fresnel widths
  std::vector<double> path;
};

Conjecture1Report conjecture1_test(const StepKernel& k, Index n_slices, Index t2_slice, const Mask& S2, Index i1,
                                   Index i3);

struct SweepRow {
  double margin = 0.0;
  double deviation = 0.0;   // |K'/K - 1| for the centred window
  double complement = 0.0;  // |K'/K| for its complement
};

std::vector<SweepRow> margin_sweep(const StepKernel& k, Index n_slices, Index t2_slice, Index i1, Index i3,
                                   const std::vector<double>& margins);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace hct
