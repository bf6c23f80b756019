#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hct/newtonian.hpp"

namespace hct {

enum class ScenarioKind { TwoSlit, Measurement, Free, Harmonic, Lattice };

struct PacketComponent {
  cplx coeff{1.0, 0.0};
  Point center{0.0, 0.0};
  Point momentum{0.0, 0.0};
  Point sigma{1.0, 1.0};
};

struct DetectorSpec {
  std::array<Index, 2> bin_cells{1, 1};
  double coarse_width = 0.0;  // intermediate-time histogram bin width, 0 disables
  Index velocity_bins = 200;
  double fringe_window = 0.0;  // half-width around the screen peak used for visibility
};

struct LatticeSpec {
  double eps = 0.01;
  Index n_slices = 16;
  Index t2_slice = 8;
  double x1 = 0.0, x3 = 0.0;
  std::vector<double> margins;
};

struct ScenarioConfig {
  std::string name;
  ScenarioKind kind = ScenarioKind::Free;
  SpatialGrid grid;
  PhysicalParams phys;
  PotentialSpec potential;
  std::vector<bool> field_terms;  // terms toggled by the field switch
  bool field = true;
  std::vector<PacketComponent> packet;
  ProposalSpec proposal;
  std::optional<ProposalSpec> alt_proposal;
  DetectorSpec detector;
  DisjointParams disjoint;
  LatticeSpec lattice;
  Index record_every = 1;
  Index n_min = 20;
  Index bohm_N = 10000;
  Index bohm_bins = 50;
  std::vector<double> checkpoints;
  Index chain_max = 4;
  Index bootstrap = 200;
  Index snapshot_every = 0;  // in record intervals; 0 keeps only the first and last
  std::uint64_t seed = 1;
  std::string out = "run";

  void validate() const;
};

ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

std::string kind_name(ScenarioKind k);

// Potential with the field terms switched according to cfg.field.
PotentialSpec effective_potential(const ScenarioConfig& cfg);
WaveFunction initial_state(const ScenarioConfig& cfg);

void set_field(ScenarioConfig& cfg, bool on);
void set_seed(ScenarioConfig& cfg, std::uint64_t seed);

}  // namespace hct
