#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "hct/branching.hpp"

using namespace hct;

namespace {

// Normalised state with constant density on the given closed cell ranges.
WaveFunction blocks(const SpatialGrid& g, const std::vector<std::pair<Index, Index>>& spans, double t) {
  WaveFunction w{g, Eigen::ArrayXcd::Zero(g.size()), t};
  for (auto [a, b] : spans)
    for (Index i = a; i <= b; ++i) w.amps(i) = 1.0;
  normalize(w);
  return w;
}

WaveFunction two_packets(const SpatialGrid& g, double sep, double sigma) {
  WaveFunction a = init_gaussian(g, -0.5 * sep, 0.0, sigma), b = init_gaussian(g, 0.5 * sep, 0.0, sigma);
  a.amps += b.amps;
  normalize(a);
  return a;
}

double gauss_density(double x, double c, double s) {
  return std::exp(-(x - c) * (x - c) / (2 * s * s)) / (std::sqrt(2 * std::numbers::pi) * s);
}

}  // namespace

TEST_CASE("detect_components: single and split packets") {
  const SpatialGrid g = make_grid(-40.0, 40.0, 1024);
  const DisjointParams p;
  const WaveFunction one = init_gaussian(g, 0.3, 0.0, 1.0);
  const auto c1 = detect_components(one, p);
  REQUIRE(c1.size() == 1);
  Index peak;
  one.density().maxCoeff(&peak);
  CHECK(c1[0].mask(g)(peak));
  CHECK(c1[0].mass == doctest::Approx(1.0).epsilon(1e-6));

  const auto c2 = detect_components(two_packets(g, 20.0, 1.0), p);
  REQUIRE(c2.size() == 2);
  CHECK(c2[0].mass == doctest::Approx(0.5).epsilon(2e-3));
  CHECK(c2[1].mass == doctest::Approx(0.5).epsilon(2e-3));
  CHECK(c2[0].rects[0].i0 < c2[1].rects[0].i0);

  // one sigma apart: the density at the midpoint stays far above the floor
  const double mid = 0.5 * (gauss_density(0.0, -0.5, 1.0) + gauss_density(0.0, 0.5, 1.0));
  CHECK(mid > p.eps_cell);
  CHECK(detect_components(two_packets(g, 1.0, 1.0), p).size() == 1);

  WaveFunction zero{g, Eigen::ArrayXcd::Zero(g.size()), 0.0};
  CHECK_THROWS_AS(detect_components(zero, p), DegenerateStateError);
}

TEST_CASE("detect_components: gap rule and eps_branch filter") {
  const SpatialGrid g = make_grid(0.0, 64.0, 64);
  DisjointParams p;
  p.gap_cells = 3;
  // three empty cells between the blocks: disjoint
  CHECK(detect_components(blocks(g, {{10, 19}, {23, 30}}, 0.0), p).size() == 2);
  // two empty cells: joined
  CHECK(detect_components(blocks(g, {{10, 19}, {22, 30}}, 0.0), p).size() == 1);
  // a one-cell block carrying mass 1/19 survives; raise eps_branch and it is dropped
  CHECK(detect_components(blocks(g, {{10, 27}, {40, 40}}, 0.0), p).size() == 2);
  p.eps_branch = 0.1;
  CHECK(detect_components(blocks(g, {{10, 27}, {40, 40}}, 0.0), p).size() == 1);
}

TEST_CASE("detect_components: 2D rectangles") {
  const SpatialGrid g = make_grid({0.0, 0.0}, {32.0, 32.0}, {32, 32});
  WaveFunction w{g, Eigen::ArrayXcd::Zero(g.size()), 0.0};
  for (Index j = 2; j < 8; ++j)
    for (Index i = 3; i < 9; ++i) w.amps(g.flat(i, j)) = 1.0;
  for (Index j = 20; j < 25; ++j)
    for (Index i = 4 + j - 20; i < 12; ++i) w.amps(g.flat(i, j)) = 1.0;
  // diagonal neighbour at Chebyshev distance 4 from the first block
  w.amps(g.flat(12, 11)) = 1.0;
  normalize(w);
  DisjointParams p;
  p.eps_branch = 1e-6;
  const auto cs = detect_components(w, p);
  REQUIRE(cs.size() == 3);
  Mask occupied = w.density() > 0.0;
  Mask uni = Mask::Constant(g.size(), false);
  Index cells = 0;
  for (const auto& c : cs) {
    uni = uni || c.mask(g);
    cells += c.cell_count();
  }
  CHECK((uni == occupied).all());
  CHECK(cells == occupied.count());
  CHECK(cs[0].rects.size() == 1);
  CHECK(cs[0].rects[0] == Rect{3, 9, 2, 8});
}

TEST_CASE("update_tree: free packet stays a single root") {
  const SpatialGrid g = make_grid(-40.0, 40.0, 512);
  PhysicalParams par;
  par.dt = 0.002;
  par.T = 4.0;
  const DisjointParams p;
  BranchTree tree = make_tree(g, p);
  WaveFunction psi = init_gaussian(g, 0.0, 0.5, 1.0);
  SplitOperator op(g, free_potential(), par);
  update_tree(tree, psi, p);
  for (int k = 0; k < 10; ++k) {
    op.advance(psi, 200);
    update_tree(tree, psi, p);
  }
  confirm_tree(tree);
  CHECK(tree.nodes.size() == 1);
  CHECK(tree.leaves() == std::vector<int>{0});
  CHECK(tree.nodes[0].support_history.size() == 11);
}

TEST_CASE("update_tree: permanent split versus re-merge") {
  const SpatialGrid g = make_grid(0.0, 64.0, 64);
  const DisjointParams p;
  SUBCASE("split persists to the horizon") {
    BranchTree t = make_tree(g, p);
    update_tree(t, blocks(g, {{20, 40}}, 0.0), p);
    update_tree(t, blocks(g, {{18, 27}, {33, 42}}, 1.0), p);
    REQUIRE(t.nodes.size() == 3);
    update_tree(t, blocks(g, {{16, 25}, {35, 44}}, 2.0), p);
    confirm_tree(t);
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].children == std::vector<int>{1, 2});
    CHECK(t.nodes[1].birth == 1);
    CHECK(t.nodes[0].last == 0);
    CHECK(t.nodes[1].packet_mass + t.nodes[2].packet_mass == doctest::Approx(1.0));
    // the root keeps an evolved support: the union of its descendants
    CHECK(t.nodes[0].support(2).cell_count() == 20);
    CHECK(t.live(2) == std::vector<int>{1, 2});
    const auto [lo, hi] = tracked_mass_range(t);
    CHECK(lo >= 1.0 - p.eps_leak);
    CHECK(hi <= 1.0 + 1e-12);
  }
  SUBCASE("split re-merges and is rolled back") {
    BranchTree t = make_tree(g, p);
    update_tree(t, blocks(g, {{20, 40}}, 0.0), p);
    update_tree(t, blocks(g, {{18, 27}, {33, 42}}, 1.0), p);
    CHECK(t.nodes.size() == 3);
    update_tree(t, blocks(g, {{20, 40}}, 2.0), p);
    confirm_tree(t);
    CHECK(t.nodes.size() == 1);
    CHECK(t.nodes[0].last == 2);
  }
  SUBCASE("tracking errors") {
    BranchTree t = make_tree(g, p);
    CHECK_THROWS_AS(update_tree(t, blocks(g, {{10, 15}, {40, 45}}, 0.0), p), TrackingError);
    BranchTree u = make_tree(g, p);
    update_tree(u, blocks(g, {{10, 15}}, 0.0), p);
    CHECK_THROWS_AS(update_tree(u, blocks(g, {{40, 45}}, 1.0), p), TrackingError);
  }
}

TEST_CASE("partial order laws") {
  const SpatialGrid g = make_grid(0.0, 64.0, 64);
  const DisjointParams p;
  BranchTree t = make_tree(g, p);
  update_tree(t, blocks(g, {{20, 40}}, 0.0), p);
  update_tree(t, blocks(g, {{18, 27}, {33, 42}}, 1.0), p);
  update_tree(t, blocks(g, {{16, 22}, {26, 28}, {35, 44}}, 2.0), p);
  update_tree(t, blocks(g, {{14, 20}, {27, 29}, {37, 46}}, 3.0), p);
  confirm_tree(t);
  // root -> {left, right}; left -> {left-left, left-right}
  REQUIRE(t.nodes.size() == 5);

  std::vector<std::pair<int, Index>> elems;
  for (Index k = 0; k < t.steps(); ++k)
    for (int id : t.live(k)) elems.push_back({id, k});

  for (auto [a, ka] : elems) {
    const Ordering self = compare(t, a, ka, a, ka);
    CHECK((self.a_le_b && self.b_le_a));
  }
  const auto le = [&](std::pair<int, Index> a, std::pair<int, Index> b) {
    return compare(t, a.first, a.second, b.first, b.second).a_le_b;
  };
  for (auto a : elems)
    for (auto b : elems) {
      if (a != b && a.second == b.second) CHECK_FALSE((le(a, b) && le(b, a)));
      for (auto c : elems) {
        if (le(a, b) && le(b, c)) CHECK(le(a, c));
        if (le(a, c) && le(b, c)) CHECK((le(a, b) || le(b, a)));
      }
    }
  CHECK(le({0, 0}, {t.leaves().back(), t.steps() - 1}));
  CHECK_FALSE(compare(t, 1, 1, 2, 1).comparable());
  CHECK_FALSE(compare(t, 1, 1, 2, 3).comparable());
}

TEST_CASE("chain projection dichotomy on a splitting packet") {
  const SpatialGrid g = make_grid(-64.0, 64.0, 1024);
  PhysicalParams par;
  par.dt = 0.001;
  par.T = 6.0;
  const DisjointParams p;
  WaveFunction psi = init_gaussian(g, 0.0, 4.0, 1.0);
  WaveFunction b = init_gaussian(g, 0.0, -4.0, 1.0);
  psi.amps = 0.6 * psi.amps + 0.8 * b.amps;
  normalize(psi);

  BranchTree tree = make_tree(g, p);
  std::vector<WaveFunction> snaps{psi};
  SplitOperator op(g, free_potential(), par);
  update_tree(tree, psi, p);
  for (int k = 0; k < 12; ++k) {
    op.advance(psi, 500);
    update_tree(tree, psi, p);
    snaps.push_back(psi);
  }
  confirm_tree(tree);
  REQUIRE(tree.leaves().size() == 2);
  const int left = tree.nodes[0].children[0], right = tree.nodes[0].children[1];
  CHECK(tree.nodes[std::size_t(right)].packet_mass == doctest::Approx(0.36).epsilon(0.01));
  CHECK(tree.nodes[std::size_t(left)].packet_mass == doctest::Approx(0.64).epsilon(0.01));

  const Index k1 = 0, k2 = 6, k3 = 12;
  REQUIRE(tree.nodes[std::size_t(left)].live(k2));
  auto region = [&](int id, Index k) { return tree.nodes[std::size_t(id)].support(k).mask(g); };
  auto link = [&](int id, Index k) { return ChainLink{region(id, k), tree.record_times[std::size_t(k)]}; };

  const WaveFunction single = chain_projection(snaps[k2], {link(left, k2)}, free_potential(), par);
  CHECK((single.amps == project(snaps[k2], region(left, k2)).amps).all());

  const WaveFunction ordered =
      chain_projection(snaps[k1], {link(0, k1), link(left, k2), link(left, k3)}, free_potential(), par);
  WaveFunction ref = project(snaps[k3], region(left, k3));
  ref.amps -= ordered.amps;
  CHECK(norm_of(ref) < 3 * p.eps_leak);

  const WaveFunction crossed =
      chain_projection(snaps[k1], {link(0, k1), link(left, k2), link(right, k3)}, free_potential(), par);
  CHECK(norm_of(crossed) < 3 * p.eps_leak);

  CHECK_THROWS_AS(chain_projection(snaps[k2], {link(left, k2), link(0, k1)}, free_potential(), par),
                  ArgumentError);
}
