#pragma once

#include <vector>

#include "hct/qdyn.hpp"

namespace hct {

struct DisjointParams {
  double eps_cell = 1e-8;  // density floor per unit volume
  Index gap_cells = 3;
  double eps_branch = 1e-4;
  double eps_leak = 1e-3;
  bool persistence = true;

  void validate() const;
};

// Half-open cell block [i0, i1) x [j0, j1).
struct Rect {
  Index i0 = 0, i1 = 0, j0 = 0, j1 = 1;
  Index cells() const { return (i1 - i0) * (j1 - j0); }
  bool operator==(const Rect&) const = default;
};

struct EpsSupport {
  std::vector<Rect> rects;
  double mass = 0.0;
  double time = 0.0;

  Mask mask(const SpatialGrid& g) const;
  void paint(const SpatialGrid& g, Eigen::ArrayXi& labels, int value) const;
  Index cell_count() const;
};

std::vector<EpsSupport> detect_components(const WaveFunction& psi, const DisjointParams& p);

// Cell -> component index, -1 outside every component.
Eigen::ArrayXi label_cells(const SpatialGrid& g, const std::vector<EpsSupport>& comps);

struct PDINode {
  int id = 0;
  int parent = -1;
  std::vector<int> children;
  Index birth = 0;  // record index
  Index last = 0;   // last record index at which the node is live
  double birth_time = 0.0;
  double packet_mass = 0.0;
  std::vector<EpsSupport> support_history;  // evolved support for record indices birth..end

  const EpsSupport& support(Index k) const {
    if (k < birth || k - birth >= Index(support_history.size())) throw ArgumentError("node has no support at k");
    return support_history[std::size_t(k - birth)];
  }
  bool live(Index k) const { return k >= birth && k <= last; }
};

struct BranchTree {
  SpatialGrid grid;
  DisjointParams params;
  std::vector<double> record_times;
  std::vector<PDINode> nodes;
  int root = 0;
  bool confirmed = false;

  std::vector<std::vector<EpsSupport>> comps;  // per record index
  std::vector<std::vector<int>> comp_node;     // live node owning each component
  std::vector<std::vector<std::vector<int>>> succ;
  Eigen::ArrayXi last_labels;

  Index steps() const { return Index(record_times.size()); }
  Index time_index(double t) const;  // exact record time match within 1e-9, else -1
  std::vector<int> live(Index k) const;
  std::vector<int> leaves() const;
  bool descends(int a, int b) const;  // b == a or b below a
};

BranchTree make_tree(const SpatialGrid& g, const DisjointParams& p);
void update_tree(BranchTree& tree, const WaveFunction& psi_t, const DisjointParams& p);
void confirm_tree(BranchTree& tree);

// Min and max over record times of the live-support mass total.
std::pair<double, double> tracked_mass_range(const BranchTree& tree);

struct Ordering {
  bool a_le_b = false;
  bool b_le_a = false;
  bool comparable() const { return a_le_b || b_le_a; }
};

// Elements are live (node, record index) pairs.
Ordering compare(const BranchTree& tree, int a, Index ka, int b, Index kb);

struct ChainLink {
  Mask region;
  double time = 0.0;
};

WaveFunction chain_projection(const WaveFunction& psi_t1, const std::vector<ChainLink>& chain,
                              const PotentialSpec& v, const PhysicalParams& p);

}  // namespace hct
