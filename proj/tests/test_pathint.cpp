#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "hct/pathint.hpp"

using namespace hct;

namespace {

const cplx I{0.0, 1.0};

// Free kernel over total time t with complex mass m(1 + i eps).
cplx free_kernel(double d, double t, double eps) {
  const cplx mt(1.0, eps);
  return std::sqrt(mt / (2.0 * std::numbers::pi * I * t)) * std::exp(I * mt * d * d / (2.0 * t));
}

cplx free_gaussian(double x, double t, double s) {
  const cplx z = 1.0 + I * t / (2.0 * s * s);
  return std::pow(2.0 * std::numbers::pi * s * s, -0.25) / std::sqrt(z) * std::exp(-x * x / (4.0 * s * s * z));
}

}  // namespace

TEST_CASE("kernel entries") {
  const SpatialGrid g = make_grid(-3.2, 3.2, 64);
  const StepKernel f = build_kernel(g, free_potential(), 0.5, 1.0, 1.0, 0.02);
  for (Index i : {0, 17, 63}) CHECK(std::abs(f.K(i, i) - free_kernel(0.0, 0.5, 0.02)) < 1e-14);
  CHECK(std::abs(f.K(40, 10) - free_kernel(3.0, 0.5, 0.02)) < 1e-12);
  CHECK(std::abs(f.K(40, 10) - f.K(10, 40)) < 1e-14);

  const StepKernel h = build_kernel(g, harmonic_potential(0.3), 0.5, 1.0, 1.0, 0.0);
  const double x = g.coord(0, 20);
  const cplx want = free_kernel(0.0, 0.5, 0.0) * std::exp(-I * 0.5 * 0.09 * x * x * 0.5);
  CHECK(std::abs(h.K(20, 20) - want) < 1e-13);

  CHECK_THROWS_AS(build_kernel(make_grid(-1.0, 1.0, 4096), free_potential(), 0.5), ResourceError);
  CHECK_THROWS_AS(build_kernel(g, free_potential(), -0.5), ConfigError);
}

TEST_CASE("lattice propagation matches a brute-force sum") {
  const SpatialGrid g = make_grid(-4.0, 4.0, 32);
  const StepKernel k = build_kernel(g, harmonic_potential(0.5), 0.7, 1.0, 1.0, 0.05);
  const double dx = g.dx(0);
  const LatticePropagator p = propagate(k, 3);
  for (Index r : {0, 5, 16, 31})
    for (Index c : {2, 16, 29}) {
      cplx s = 0.0;
      for (Index a = 0; a < 32; ++a)
        for (Index b = 0; b < 32; ++b) s += k.K(r, a) * k.K(a, b) * k.K(b, c) * dx * dx;
      CHECK(std::abs(p.K(r, c) - s) < 1e-12 * std::max(1.0, std::abs(s)));
    }
  CHECK(p.t3 == doctest::Approx(2.1));

  Mask S = Mask::Constant(32, false);
  S.segment(10, 8).setConstant(true);
  const LatticePropagator q = propagate(k, 3, SliceConstraint{2, S});
  cplx s = 0.0;
  for (Index a = 10; a < 18; ++a)
    for (Index b = 0; b < 32; ++b) s += k.K(7, a) * k.K(a, b) * k.K(b, 12) * dx * dx;
  CHECK(std::abs(q.K(7, 12) - s) < 1e-12 * std::max(1.0, std::abs(s)));
  CHECK(std::abs(propagate_column(k, 3, 12, SliceConstraint{2, S})(7) - s) < 1e-12 * std::max(1.0, std::abs(s)));

  CHECK_THROWS_AS(propagate(k, 3, SliceConstraint{3, S}), ArgumentError);
  CHECK_THROWS_AS(propagate(k, 1), ArgumentError);
}

TEST_CASE("composition, identity constraint and linearity") {
  const SpatialGrid g = make_grid(-6.4, 6.4, 128);
  const StepKernel k = build_kernel(g, harmonic_potential(0.2), 0.8, 1.0, 1.0, 0.03);
  const LatticePropagator two = propagate(k, 2), four = propagate(k, 4);
  const Eigen::MatrixXcd comp = (two.K * two.K) * g.dx(0);
  CHECK((comp - four.K).norm() < 1e-10 * four.K.norm());

  const Mask all = Mask::Constant(128, true);
  CHECK(propagate(k, 4, SliceConstraint{2, all}).K == four.K);

  const Mask S = interval_mask(g, -1.0, 2.5);
  const Eigen::MatrixXcd split =
      propagate(k, 4, SliceConstraint{2, S}).K + propagate(k, 4, SliceConstraint{2, Mask(!S)}).K;
  CHECK((split - four.K).norm() < 1e-12 * four.K.norm());
}

TEST_CASE("free lattice propagator against the continuum") {
  const SpatialGrid g = make_grid(-51.2, 51.2, 1024);
  const double eps = 0.01, dt = 1.0;
  const StepKernel k = build_kernel(g, free_potential(), dt, 1.0, 1.0, eps);
  const Index n = 4, i1 = 512;
  const Eigen::VectorXcd col = propagate_column(k, n, i1);
  double worst = 0.0;
  for (Index r = 512 - 40; r <= 512 + 40; ++r) {
    const cplx want = free_kernel(g.coord(0, r) - g.coord(0, i1), double(n) * dt, eps);
    worst = std::max(worst, std::abs(col(r) - want) / std::abs(want));
  }
  CHECK(worst < 0.02);

  // one bare step on a resolved packet reproduces free spreading and conserves the norm
  const SpatialGrid h = make_grid(-12.8, 12.8, 256);
  const StepKernel b = build_kernel(h, free_potential(), 1.0);
  Eigen::VectorXcd psi(256), want(256);
  for (Index i = 0; i < 256; ++i) {
    psi(i) = free_gaussian(h.coord(0, i), 0.0, 1.0);
    want(i) = free_gaussian(h.coord(0, i), 1.0, 1.0);
  }
  const Eigen::VectorXcd out = (b.K * psi) * h.dx(0);
  CHECK((out - want).norm() * std::sqrt(h.dx(0)) < 1e-6);
  CHECK(out.squaredNorm() * h.dx(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("classical shooting in a harmonic well") {
  const SpatialGrid g = make_grid(-25.6, 25.6, 512);
  const double w = 0.3, dt = 0.5;
  const StepKernel k = build_kernel(g, harmonic_potential(w), dt, 1.0, 1.0, 0.01);
  const Index n = 8;
  const double x1 = -2.0, x3 = 3.0, T = n * dt;
  const ShotPath sp = shoot_classical(k, n, x1, x3);
  REQUIRE(sp.found);
  const double v0 = w * (x3 - x1 * std::cos(w * T)) / std::sin(w * T);
  CHECK(sp.v0 == doctest::Approx(v0).epsilon(1e-6));
  REQUIRE(sp.x.size() == std::size_t(n + 1));
  for (Index s = 0; s <= n; ++s) {
    const double t = double(s) * dt;
    CHECK(sp.x[std::size_t(s)] == doctest::Approx(x1 * std::cos(w * t) + v0 / w * std::sin(w * t)).epsilon(1e-6));
  }
  CHECK(fresnel_width(k, 2, n) == doctest::Approx(std::sqrt(1.0 * 3.0 / 4.0)));
}

TEST_CASE("window tests and margin sweep") {
  const SpatialGrid g = make_grid(-51.2, 51.2, 1024);
  const StepKernel k = build_kernel(g, free_potential(), 1.0, 1.0, 1.0, 0.01);
  const Index n = 8, t2 = 4, i1 = 500, i3 = 530;
  const double xc = 0.5 * (g.coord(0, i1) + g.coord(0, i3));
  const double wf = fresnel_width(k, t2, n);

  const Conjecture1Report wide = conjecture1_test(k, n, t2, interval_mask(g, xc - 8 * wf, xc + 8 * wf), i1, i3);
  REQUIRE(wide.shot);
  CHECK(wide.classical_hit);
  CHECK(wide.x2 == doctest::Approx(xc).epsilon(1e-9));
  CHECK(wide.margin == doctest::Approx(8.0).epsilon(0.05));
  CHECK(wide.deviation < 0.1);

  const Conjecture1Report off = conjecture1_test(k, n, t2, interval_mask(g, xc + 6 * wf, xc + 20 * wf), i1, i3);
  CHECK_FALSE(off.classical_hit);
  CHECK(off.ratio < 0.1);

  const std::vector<double> margins{0.5, 1.0, 2.0, 4.0, 8.0};
  const auto rows = margin_sweep(k, n, t2, i1, i3, margins);
  REQUIRE(rows.size() == margins.size());
  for (const auto& r : rows) CHECK(r.deviation == doctest::Approx(r.complement).epsilon(1e-9));
  CHECK(rows.back().deviation < rows.front().deviation);
}

TEST_CASE("interval helpers and rank correlation") {
  const SpatialGrid g = make_grid(0.0, 3.2, 32);
  const Mask m = interval_mask(g, 0.95, 2.05);
  const auto iv = mask_intervals(g, m);
  REQUIRE(iv.size() == 1);
  CHECK(iv[0].first == doctest::Approx(0.95));
  CHECK(iv[0].second == doctest::Approx(2.05));
  CHECK(m.count() == 11);

  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  // ranks (0, 1.5, 1.5, 3) and (0, 2, 1, 3)
  CHECK(spearman({1, 2, 2, 3}, {1, 3, 2, 4}) == doctest::Approx(4.5 / std::sqrt(22.5)));
  CHECK_THROWS_AS(spearman({1.0}, {1.0}), ArgumentError);
}
