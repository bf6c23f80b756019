#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "hct/branching.hpp"

namespace hct {

// -grad V on grid points by central differences, looked up bilinearly; cached per active term set.
class ForceField {
 public:
  ForceField(const SpatialGrid& g, const PotentialSpec& v);
  bool active(double t) const { return pot_.active_set(t) != 0; }
  bool at(const Point& x, double t, Point& f);  // false off the grid
  void warm(const PhysicalParams& p, double t0);  // fill the cache before concurrent lookups
  const SpatialGrid& grid() const { return grid_; }

 private:
  const std::array<Eigen::ArrayXd, 2>& field(unsigned set);
  SpatialGrid grid_;
  PotentialSpec pot_;
  std::map<unsigned, std::array<Eigen::ArrayXd, 2>> cache_;
};

struct VerletState {
  Point x{0.0, 0.0};
  Point v{0.0, 0.0};
};

// Velocity Verlet with an arbitrary force law f(x, t); returns false if the force lookup fails.
bool verlet(VerletState& s, const std::function<bool(const Point&, double, Point&)>& force, double t0, double dt,
            Index n, int dim, const std::function<void(Index, const VerletState&)>& on_step = {});

struct ClassicalTrajectory {
  Point x0{0.0, 0.0}, v0{0.0, 0.0};
  Point xT{0.0, 0.0}, vT{0.0, 0.0};
  std::vector<std::int32_t> cells;  // flat cell per record time, -1 off grid
  Index final_bin = -1;
  double weight = 0.0;
  bool escaped = false;
};

ClassicalTrajectory integrate_classical(const Point& x0, const Point& v0, ForceField& force, const PhysicalParams& p,
                                        Index record_every, double t0 = 0.0);
ClassicalTrajectory integrate_classical(const Point& x0, const Point& v0, const PotentialSpec& v,
                                        const SpatialGrid& g, const PhysicalParams& p, Index record_every);

double classical_energy(const VerletState& s, const PotentialSpec& v, const SpatialGrid& g, const PhysicalParams& p,
                        double t);

struct ProposalSpec {
  enum class Position { Born, UniformSupport } position = Position::Born;
  std::array<double, 2> vmin{-1.0, -1.0};
  std::array<double, 2> vmax{1.0, 1.0};
  Index N = 10000;
  std::uint64_t seed = 1;
};

struct WeightedEnsemble {
  std::vector<ClassicalTrajectory> traj;
  std::vector<double> record_times;
  Index escaped = 0;
  double renorm = 1.0;
  std::vector<Index> underfilled;  // bins with mass > eps_branch but fewer than n_min landings
};

WeightedEnsemble run_classical(const WaveFunction& psi0, const Mask& S0, const PotentialSpec& v,
                               const PhysicalParams& p, const ProposalSpec& prop, Index record_every);

// Partition of the grid at T: leaf supports refined by detector blocks; cells outside leaves form
// one residual bin carrying no weight.
struct FinalMeasure {
  Eigen::ArrayXi bin_of_cell;
  std::vector<double> mass;
  std::vector<int> leaf_of_bin;  // -1 for the residual bin
  int residual = -1;
};

FinalMeasure make_final_measure(const BranchTree& tree, const WaveFunction& psiT, std::array<Index, 2> bin_cells);
FinalMeasure measure_from_labels(const Eigen::ArrayXi& labels, const WaveFunction& psiT);

void assign_weights(WeightedEnsemble& e, const FinalMeasure& m, const DisjointParams& p, Index n_min = 20);

double pushforward_mass(const WeightedEnsemble& e, const Mask& region, Index k);

// Live node containing each trajectory at each record time, -1 outside all live supports.
using Membership = std::vector<std::vector<int>>;  // [record index][trajectory]
Membership branch_membership(const WeightedEnsemble& e, const BranchTree& tree);

struct BornRow {
  int node = 0;
  double time = 0.0;
  double mu = 0.0;
  double born = 0.0;
  double delta() const { return std::abs(mu - born); }
};

std::vector<BornRow> branch_born_report(const WeightedEnsemble& e, const BranchTree& tree, const Membership& m);

struct Lemma1Report {
  double sibling = 0.0;
  double reentry = 0.0;
  double outside = 0.0;
  double outside_unweighted = 0.0;
};

Lemma1Report lemma1_report(const WeightedEnsemble& e, const BranchTree& tree, const Membership& m);

double sigma_consistency(const WeightedEnsemble& e, const BranchTree& tree, const Membership& m, int node, Index k);

}  // namespace hct
