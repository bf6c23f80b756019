#include "hct/branching.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace hct {

namespace {

struct Run {
  Index j, i0, i1;  // inclusive cell span on row j
};

struct UnionFind {
  std::vector<int> up;
  explicit UnionFind(std::size_t n) : up(n) { std::iota(up.begin(), up.end(), 0); }
  int find(int a) {
    while (up[a] != a) a = up[a] = up[up[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) up[std::max(a, b)] = std::min(a, b);
  }
};

std::vector<Rect> runs_to_rects(std::vector<Run> runs) {
  std::sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) {
    return a.j != b.j ? a.j < b.j : a.i0 < b.i0;
  });
  std::vector<Rect> rects;
  std::map<std::pair<Index, Index>, std::size_t> open;
  for (const Run& r : runs) {
    auto it = open.find({r.i0, r.i1});
    if (it != open.end() && rects[it->second].j1 == r.j) {
      rects[it->second].j1 = r.j + 1;
    } else {
      open[{r.i0, r.i1}] = rects.size();
      rects.push_back({r.i0, r.i1 + 1, r.j, r.j + 1});
    }
  }
  return rects;
}

}  // namespace

void DisjointParams::validate() const {
  if (!(eps_cell > 0.0) || gap_cells < 1 || !(eps_branch > 0.0) || !(eps_leak > 0.0))
    throw ConfigError("disjointness thresholds must be positive");
}

Mask EpsSupport::mask(const SpatialGrid& g) const {
  Mask m = Mask::Constant(g.size(), false);
  for (const Rect& r : rects)
    for (Index j = r.j0; j < r.j1; ++j) m.segment(g.flat(r.i0, j), r.i1 - r.i0).setConstant(true);
  return m;
}

void EpsSupport::paint(const SpatialGrid& g, Eigen::ArrayXi& labels, int value) const {
  for (const Rect& r : rects)
    for (Index j = r.j0; j < r.j1; ++j) labels.segment(g.flat(r.i0, j), r.i1 - r.i0).setConstant(value);
}

Index EpsSupport::cell_count() const {
  Index s = 0;
  for (const Rect& r : rects) s += r.cells();
  return s;
}

std::vector<EpsSupport> detect_components(const WaveFunction& psi, const DisjointParams& p) {
  const SpatialGrid& g = psi.grid;
  const Eigen::ArrayXd rho = psi.density();
  const Index nx = g.n[0], ny = g.n[1];

  std::vector<Run> runs;
  std::vector<std::size_t> row_start(std::size_t(ny) + 1, 0);
  for (Index j = 0; j < ny; ++j) {
    row_start[std::size_t(j)] = runs.size();
    Index i = 0;
    while (i < nx) {
      if (rho(g.flat(i, j)) > p.eps_cell) {
        Index e = i;
        while (e + 1 < nx && rho(g.flat(e + 1, j)) > p.eps_cell) ++e;
        runs.push_back({j, i, e});
        i = e + 1;
      } else {
        ++i;
      }
    }
  }
  row_start[std::size_t(ny)] = runs.size();
  if (runs.empty()) throw DegenerateStateError("no cell above eps_cell");

  UnionFind uf(runs.size());
  const Index gap = p.gap_cells;
  for (Index j = 0; j < ny; ++j) {
    for (std::size_t a = row_start[j]; a < row_start[j + 1]; ++a) {
      if (a + 1 < row_start[j + 1] && runs[a + 1].i0 - runs[a].i1 <= gap) uf.unite(int(a), int(a + 1));
      for (Index j2 = j + 1; j2 <= std::min(j + gap, ny - 1); ++j2)
        for (std::size_t b = row_start[j2]; b < row_start[j2 + 1]; ++b) {
          const Index d = std::max({Index(0), runs[b].i0 - runs[a].i1, runs[a].i0 - runs[b].i1});
          if (d <= gap) uf.unite(int(a), int(b));
        }
    }
  }

  std::map<int, std::vector<Run>> groups;
  for (std::size_t a = 0; a < runs.size(); ++a) groups[uf.find(int(a))].push_back(runs[a]);

  struct Candidate {
    Index min_i, min_j;
    EpsSupport s;
  };
  std::vector<Candidate> out;
  for (auto& [root, rs] : groups) {
    double m = 0.0;
    Index min_i = nx, min_j = ny;
    for (const Run& r : rs) {
      m += rho.segment(g.flat(r.i0, r.j), r.i1 - r.i0 + 1).sum();
      min_i = std::min(min_i, r.i0);
      min_j = std::min(min_j, r.j);
    }
    m *= g.dV();
    if (m > p.eps_branch) out.push_back({min_i, min_j, {runs_to_rects(rs), m, psi.time}});
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    return a.min_i != b.min_i ? a.min_i < b.min_i : a.min_j < b.min_j;
  });
  std::vector<EpsSupport> res;
  res.reserve(out.size());
  for (auto& c : out) res.push_back(std::move(c.s));
  return res;
}

Eigen::ArrayXi label_cells(const SpatialGrid& g, const std::vector<EpsSupport>& comps) {
  Eigen::ArrayXi labels = Eigen::ArrayXi::Constant(g.size(), -1);
  for (std::size_t c = 0; c < comps.size(); ++c) comps[c].paint(g, labels, int(c));
  return labels;
}

Index BranchTree::time_index(double t) const {
  auto it = std::lower_bound(record_times.begin(), record_times.end(), t - 1e-9);
  if (it == record_times.end() || std::abs(*it - t) > 1e-9) return -1;
  return Index(it - record_times.begin());
}

std::vector<int> BranchTree::live(Index k) const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (n.live(k)) out.push_back(n.id);
  return out;
}

std::vector<int> BranchTree::leaves() const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (n.children.empty()) out.push_back(n.id);
  return out;
}

bool BranchTree::descends(int a, int b) const {
  while (b >= 0) {
    if (b == a) return true;
    b = nodes[std::size_t(b)].parent;
  }
  return false;
}

BranchTree make_tree(const SpatialGrid& g, const DisjointParams& p) {
  p.validate();
  BranchTree t;
  t.grid = g;
  t.params = p;
  return t;
}

namespace {

// Backward class pass: components whose futures meet share a class; a class feeding two or more
// later classes is a split. Rebuilds nodes for the current prefix.
void rebuild(BranchTree& tree) {
  const Index K = tree.steps();
  std::vector<std::vector<int>> cls(static_cast<std::size_t>(K));
  std::vector<int> ncls(std::size_t(K), 0);
  cls[K - 1].resize(tree.comps[K - 1].size());
  std::iota(cls[K - 1].begin(), cls[K - 1].end(), 0);
  ncls[K - 1] = int(tree.comps[K - 1].size());

  std::vector<std::vector<std::vector<int>>> targets(static_cast<std::size_t>(K));
  for (Index k = K - 2; k >= 0; --k) {
    const auto& cs = tree.comps[k];
    UnionFind uf(cs.size());
    std::vector<int> owner(std::size_t(ncls[k + 1]), -1);
    for (std::size_t a = 0; a < cs.size(); ++a) {
      if (tree.succ[k][a].empty()) {
        std::ostringstream os;
        os << "component " << a << " at t=" << tree.record_times[k] << " has no successor";
        throw TrackingError(os.str());
      }
      for (int b : tree.succ[k][a]) {
        const int c = cls[k + 1][b];
        if (owner[c] < 0)
          owner[c] = int(a);
        else
          uf.unite(owner[c], int(a));
      }
    }
    std::vector<int> id(cs.size(), -1);
    int next = 0;
    cls[k].resize(cs.size());
    for (std::size_t a = 0; a < cs.size(); ++a) {
      const int r = uf.find(int(a));
      if (id[r] < 0) id[r] = next++;
      cls[k][a] = id[r];
    }
    ncls[k] = next;
    targets[k].assign(std::size_t(next), {});
    for (std::size_t a = 0; a < cs.size(); ++a)
      for (int b : tree.succ[k][a]) targets[k][cls[k][a]].push_back(cls[k + 1][b]);
    for (auto& v : targets[k]) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (int c = 0; c < ncls[k + 1]; ++c)
      if (owner[c] < 0) {
        std::ostringstream os;
        os << "component class at t=" << tree.record_times[k + 1] << " has no predecessor";
        throw TrackingError(os.str());
      }
  }
  if (ncls[0] != 1) {
    std::ostringstream os;
    os << "initial state has " << ncls[0] << " permanent components, expected 1";
    throw TrackingError(os.str());
  }

  tree.nodes.clear();
  PDINode root;
  root.id = 0;
  root.birth = 0;
  root.birth_time = tree.record_times[0];
  tree.nodes.push_back(root);
  tree.root = 0;
  std::vector<int> node_of{0};
  for (Index k = 0; k < K; ++k) {
    std::vector<int> next_node(std::size_t(k + 1 < K ? ncls[k + 1] : 0), -1);
    for (int c = 0; c < ncls[k]; ++c) {
      PDINode& n = tree.nodes[std::size_t(node_of[c])];
      n.last = k;
      if (k + 1 == K) continue;
      const auto& tg = targets[k][c];
      if (tg.size() == 1) {
        next_node[tg[0]] = n.id;
        continue;
      }
      const int pid = n.id;
      for (int c2 : tg) {
        PDINode ch;
        ch.id = int(tree.nodes.size());
        ch.parent = pid;
        ch.birth = k + 1;
        ch.birth_time = tree.record_times[k + 1];
        tree.nodes[std::size_t(pid)].children.push_back(ch.id);
        next_node[c2] = ch.id;
        tree.nodes.push_back(ch);
      }
    }
    tree.comp_node[k].assign(tree.comps[k].size(), -1);
    for (std::size_t a = 0; a < tree.comps[k].size(); ++a) tree.comp_node[k][a] = node_of[cls[k][a]];
    node_of = std::move(next_node);
  }

  for (auto& n : tree.nodes) {
    n.support_history.assign(std::size_t(K - n.birth), {});
    for (Index k = n.birth; k < K; ++k) n.support_history[k - n.birth].time = tree.record_times[k];
  }
  for (Index k = 0; k < K; ++k)
    for (std::size_t a = 0; a < tree.comps[k].size(); ++a) {
      const EpsSupport& s = tree.comps[k][a];
      for (int id = tree.comp_node[k][a]; id >= 0; id = tree.nodes[std::size_t(id)].parent) {
        EpsSupport& dst = tree.nodes[std::size_t(id)].support_history[k - tree.nodes[std::size_t(id)].birth];
        dst.rects.insert(dst.rects.end(), s.rects.begin(), s.rects.end());
        dst.mass += s.mass;
      }
    }
  for (auto& n : tree.nodes) n.packet_mass = n.support_history.front().mass;
}

}  // namespace

void update_tree(BranchTree& tree, const WaveFunction& psi_t, const DisjointParams& p) {
  if (!(psi_t.grid == tree.grid)) throw ArgumentError("tree and wave function grids differ");
  if (!tree.record_times.empty() && !(psi_t.time > tree.record_times.back()))
    throw ArgumentError("record times must increase");
  tree.params = p;
  auto comps = detect_components(psi_t, p);
  Eigen::ArrayXi labels = label_cells(tree.grid, comps);
  if (!tree.comps.empty()) {
    const auto& prev = tree.comps.back();
    std::vector<std::vector<int>> links(prev.size());
    for (Index f = 0; f < labels.size(); ++f) {
      const int a = tree.last_labels(f), b = labels(f);
      if (a >= 0 && b >= 0) links[a].push_back(b);
    }
    for (auto& v : links) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    tree.succ.push_back(std::move(links));
  }
  tree.record_times.push_back(psi_t.time);
  tree.comps.push_back(std::move(comps));
  tree.comp_node.emplace_back();
  tree.last_labels = std::move(labels);
  tree.confirmed = false;
  rebuild(tree);
}

void confirm_tree(BranchTree& tree) {
  if (tree.comps.empty()) throw ArgumentError("empty tree");
  rebuild(tree);
  tree.confirmed = true;
}

std::pair<double, double> tracked_mass_range(const BranchTree& tree) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (Index k = 0; k < tree.steps(); ++k) {
    double s = 0.0;
    for (int id : tree.live(k)) s += tree.nodes[std::size_t(id)].support(k).mass;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {lo, hi};
}

Ordering compare(const BranchTree& tree, int a, Index ka, int b, Index kb) {
  Ordering o;
  o.a_le_b = ka <= kb && tree.descends(a, b);
  o.b_le_a = kb <= ka && tree.descends(b, a);
  return o;
}

WaveFunction chain_projection(const WaveFunction& psi_t1, const std::vector<ChainLink>& chain,
                              const PotentialSpec& v, const PhysicalParams& p) {
  if (chain.empty()) throw ArgumentError("empty chain");
  for (std::size_t i = 1; i < chain.size(); ++i)
    if (!(chain[i].time > chain[i - 1].time)) throw ArgumentError("chain times must ascend");
  if (std::abs(psi_t1.time - chain.front().time) > 1e-9) throw ArgumentError("chain must start at psi time");
  SplitOperator op(psi_t1.grid, v, p);
  WaveFunction w = project(psi_t1, chain.front().region);
  for (std::size_t i = 1; i < chain.size(); ++i) {
    const Index n = Index(std::llround((chain[i].time - w.time) / p.dt));
    op.advance(w, n);
    w.time = chain[i].time;
    w = project(w, chain[i].region);
  }
  return w;
}

}  // namespace hct
