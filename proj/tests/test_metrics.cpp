#include <cmath>

#include "doctest.h"
#include "quivernet/errors.hpp"
#include "quivernet/metrics.hpp"
#include "support.hpp"

using namespace quivernet;
using namespace qn_test;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidInput;
}

FramedRep loop_rep(double v, double e) {
  return FramedRep{{Matrix::Constant(1, 1, v)}, {Matrix::Constant(1, 1, e)}};
}

// A3 in chart gauge with a bias coordinate at the hidden vertex, n = (d1, d2+1, d3).
struct A3Chart {
  Quiver q = a3();
  DimVectors dims;
  Matrix W1, W2, b;
  FramedRep r;
};

A3Chart a3_chart(int d1, int d2, int d3, Rng& rng, double scale = 1.0) {
  A3Chart c;
  c.dims = DimVectors{{d1, d2, d3}, {d1, d2 + 1, d3}};
  c.W1 = random_gaussian<double>(d2, d1, rng, scale);
  c.W2 = random_gaussian<double>(d3, d2, rng, scale);
  c.b = random_gaussian<double>(d2, 1, rng, scale);
  ChartPoint p{{c.W1, c.W2}, {Matrix(d1, 0), c.b, Matrix(d3, 0)}};
  c.r = from_chart(c.q, c.dims, p);
  return c;
}

}  // namespace

// ===========================================================================
// assemble_rho
// ===========================================================================

TEST_CASE("rho: A3 vertex 2 is (e2, V(a1) e1)") {
  Rng rng(1);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 3, 1});
  auto r = random_rep<double>(q, dims, rng);
  auto rho = assemble_rho(q, dims, r, 1, 2);
  REQUIRE(rho.paths.size() == 2);
  REQUIRE(rho.matrix.cols() == 4 + 3);
  CHECK(max_abs(Matrix(rho.matrix.leftCols(4) - r.e[1])) == 0.0);
  CHECK(max_abs(Matrix(rho.matrix.rightCols(3) - r.V[0] * r.e[0])) == 0.0);
}

TEST_CASE("rho: single vertex is e") {
  Rng rng(2);
  auto q = single_vertex();
  DimVectors dims{{2}, {5}};
  auto r = random_rep<double>(q, dims, rng);
  CHECK(max_abs(Matrix(assemble_rho(q, dims, r, 0, 0).matrix - r.e[0])) == 0.0);
}

TEST_CASE("rho: loop with max_len 2 is (e, Ve, V^2 e)") {
  auto rho = assemble_rho(loop(), DimVectors{{1}, {1}}, loop_rep(0.5, 2.0), 0, 2);
  REQUIRE(rho.matrix.cols() == 3);
  CHECK(rho.matrix(0, 0) == 2.0);
  CHECK(rho.matrix(0, 1) == 1.0);
  CHECK(rho.matrix(0, 2) == 0.5);
}

// ===========================================================================
// vertex_metrics
// ===========================================================================

TEST_CASE("metrics: single vertex on the level has H = I") {
  Rng rng(3);
  auto q = single_vertex();
  DimVectors dims{{2}, {4}};
  auto r = project_to_moment_level(q, dims, random_stable_rep<double>(q, dims, rng));
  auto m = vertex_metrics(q, dims, r);
  CHECK(max_abs(Matrix(m.H[0] - Matrix::Identity(2, 2))) < 1e-9);
}

TEST_CASE("metrics: A3 chart matches the closed-form metrics") {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    auto c = a3_chart(2, 3, 2, rng);
    auto m = vertex_metrics(c.q, c.dims, c.r);
    Matrix I2 = Matrix::Identity(3, 3), I3 = Matrix::Identity(2, 2);
    Matrix H2 = (I2 + c.b * c.b.transpose() + c.W1 * c.W1.transpose()).inverse();
    Matrix H3 = (I3 + c.W2 * c.W2.transpose() + c.W2 * c.b * c.b.transpose() * c.W2.transpose() +
                 c.W2 * c.W1 * c.W1.transpose() * c.W2.transpose())
                    .inverse();
    CHECK(max_abs(Matrix(m.H[0] - Matrix::Identity(2, 2))) < 1e-12);
    CHECK(max_abs(Matrix(m.H[1] - H2)) < 1e-10);
    CHECK(max_abs(Matrix(m.H[2] - H3)) < 1e-10);
  }
}

TEST_CASE("metrics: loop closed form") {
  // On the level e = 1; the series is 1 + 0.25 + 0.25^2 + ...
  auto q = loop();
  DimVectors dims{{1}, {1}};
  auto m = vertex_metrics(q, dims, loop_rep(0.5, 1.0));
  CHECK(m.cyclic);
  CHECK(m.tail_certified);
  CHECK(std::abs(m.gram[0](0, 0) - 1.0 / 0.75) <= m.tail_bound);
  CHECK(m.tail_bound < 1e-10);
  CHECK(std::abs(m.H[0](0, 0) - 0.75) < 1e-10);
  auto m2 = vertex_metrics(q, dims, loop_rep(0.5, 3.0));
  CHECK(std::abs(m2.gram[0](0, 0) - 9.0 / 0.75) <= m2.tail_bound);
}

TEST_CASE("metrics: explicit truncation lengths bound the error") {
  auto q = loop();
  DimVectors dims{{1}, {1}};
  for (std::size_t L : {0, 3, 10}) {
    MetricOptions opts;
    opts.max_len = L;
    auto m = vertex_metrics(q, dims, loop_rep(0.5, 1.0), opts);
    double err = std::abs(m.gram[0](0, 0) - 1.0 / 0.75);
    CHECK(err <= m.tail_bound);
    CHECK(m.tail_bound < 2 * err + 1e-15);  // the bound is tight for one loop
  }
}

TEST_CASE("metrics: error codes") {
  DimVectors dims{{1}, {1}};
  CHECK(code_of([&] { vertex_metrics(loop(), dims, loop_rep(1.5, 1.0)); }) == ErrorCode::OutsideDomain);
  CHECK(code_of([&] { vertex_metrics(single_vertex(), dims, FramedRep{{}, {Matrix::Zero(1, 1)}}); }) ==
        ErrorCode::NotStable);
  MetricOptions loose;
  loose.require_stable = false;
  CHECK(code_of([&] { vertex_metrics(single_vertex(), dims, FramedRep{{}, {Matrix::Zero(1, 1)}}, loose); }) ==
        ErrorCode::SingularGram);
}

TEST_CASE("metrics: two-cycle with a large factor still certifies") {
  auto q = make_quiver({"1", "2"}, {{"a", "1", "2"}, {"b", "2", "1"}});
  DimVectors dims{{1, 1}, {1, 1}};
  FramedRep r{{Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 0.2)},
              {Matrix::Ones(1, 1), Matrix::Ones(1, 1)}};
  auto m = vertex_metrics(q, dims, r);
  CHECK(m.tail_certified);
  // gram_1 = (1 + 0.2^2) / (1 - 0.36), gram_2 = (1 + 9) / (1 - 0.36)
  CHECK(std::abs(m.gram[0](0, 0) - 1.04 / 0.64) <= m.tail_bound);
  CHECK(std::abs(m.gram[1](0, 0) - 10.0 / 0.64) <= m.tail_bound);
}

// ===========================================================================
// gram_recursion_check
// ===========================================================================

TEST_CASE("recursion: acyclic quivers") {
  Rng rng(5);
  auto q = make_quiver({"1", "2", "3", "4"},
                       {{"a", "1", "2"}, {"b", "2", "3"}, {"c", "1", "3"}, {"d", "3", "4"}, {"e", "1", "3"}});
  auto dims = DimVectors::with_bias_framing({2, 1, 3, 2});
  for (int t = 0; t < 20; ++t) {
    auto r = random_stable_rep<double>(q, dims, rng);
    CHECK(gram_recursion_check(q, dims, r, vertex_metrics(q, dims, r)) <= 1e-10);
  }
}

TEST_CASE("recursion: single vertex is exact") {
  Rng rng(6);
  auto q = single_vertex();
  DimVectors dims{{2}, {3}};
  auto r = random_stable_rep<double>(q, dims, rng);
  CHECK(gram_recursion_check(q, dims, r, vertex_metrics(q, dims, r)) == 0.0);
}

TEST_CASE("recursion: cyclic residual is within the tail estimate") {
  auto q = make_quiver({"1", "2"}, {{"a", "1", "2"}, {"l", "2", "2"}});
  DimVectors dims{{1, 2}, {2, 2}};
  Rng rng(7);
  auto r = random_stable_rep<double>(q, dims, rng);
  r.V[1] *= 0.6 / op_norm(r.V[1]);
  for (std::size_t L : {5, 10, 20}) {
    MetricOptions opts;
    opts.max_len = L;
    auto m = vertex_metrics(q, dims, r, opts);
    CHECK(gram_recursion_check(q, dims, r, m) <= m.tail_bound);
    opts.max_len = L + 5;
    auto longer = vertex_metrics(q, dims, r, opts);
    CHECK(max_abs(Matrix(longer.gram[1] - m.gram[1])) <= m.tail_bound);
  }
}

// ===========================================================================
// equivariance
// ===========================================================================

TEST_CASE("equivariance: identity, unitary and general gauges") {
  Rng rng(8);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({3, 2, 3});
  for (int t = 0; t < 20; ++t) {
    auto r = random_stable_rep<double>(q, dims, rng);
    CHECK(equivariance_check(q, dims, r, identity_gauge<double>(dims)) == doctest::Approx(0.0));
    CHECK(equivariance_check(q, dims, r, random_unitary_gauge<double>(dims, rng)) <= 1e-8);
    CHECK(equivariance_check(q, dims, r, random_gauge<double>(dims, rng)) <= 1e-8);
  }
}

TEST_CASE("equivariance: complex mode") {
  Rng rng(9);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 2, 2});
  auto r = random_stable_rep<Complex>(q, dims, rng);
  CHECK(equivariance_check(q, dims, r, random_gauge<Complex>(dims, rng)) <= 1e-8);
  CHECK(equivariance_check(q, dims, r, random_unitary_gauge<Complex>(dims, rng)) <= 1e-8);
}

TEST_CASE("frame invariance under unitary right action on framings") {
  Rng rng(10);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 3, 2});
  auto r = random_stable_rep<double>(q, dims, rng);
  std::vector<Matrix> u;
  for (int n : dims.n) u.push_back(random_unitary<double>(n, rng));
  auto before = vertex_metrics(q, dims, r);
  auto after = vertex_metrics(q, dims, act_on_frames(r, u));
  for (std::size_t i = 0; i < 3; ++i) CHECK(max_abs(Matrix(after.H[i] - before.H[i])) <= 1e-10);
}

TEST_CASE("on the moment level gram - I is positive semidefinite") {
  Rng rng(11);
  auto q = a3();
  for (int t = 0; t < 20; ++t) {
    std::uniform_int_distribution<int> dist(1, 4);
    int d1 = dist(rng), d2 = dist(rng), d3 = dist(rng);
    auto dims = DimVectors::with_bias_framing({d1, d2, d3});
    auto r = project_to_moment_level(q, dims, random_stable_rep<double>(q, dims, rng));
    auto m = vertex_metrics(q, dims, r);
    for (std::size_t i = 0; i < 3; ++i) {
      Matrix shifted = m.gram[i] - Matrix::Identity(m.gram[i].rows(), m.gram[i].cols());
      CHECK(min_eigenvalue(shifted) >= -1e-8);
    }
  }
}

// ===========================================================================
// Grassmann-bundle agreement (A2/A3 only)
// ===========================================================================

TEST_CASE("metric agrees with the iterated Grassmannian chart metric") {
  // At vertex i the Grassmann-bundle point is phi = (e_i | V_a gram_t^{1/2}, ...);
  // in the chart phi = (b p) its metric reads b^{-*} (I + zeta zeta*)^{-1} b^{-1}.
  Rng rng(12);
  for (const auto& q : {a2(), a3()}) {
    std::vector<int> d(q.num_vertices());
    for (auto& x : d) x = std::uniform_int_distribution<int>(1, 3)(rng);
    auto dims = DimVectors::with_bias_framing(d);
    auto r = random_stable_rep<double>(q, dims, rng);
    auto m = vertex_metrics(q, dims, r);
    for (std::size_t i = 0; i < q.num_vertices(); ++i) {
      Matrix phi = r.e[i];
      for (std::size_t a : q.arrows_into(i)) {
        Matrix half = hermitian_function(m.gram[q.tail(a)], [](double l) { return std::sqrt(l); });
        Matrix block = r.V[a] * half;
        Matrix grown(phi.rows(), phi.cols() + block.cols());
        grown << phi, block;
        phi = grown;
      }
      GrassmannChart chart{phi.leftCols(d[i]), phi.rightCols(phi.cols() - d[i])};
      Matrix z = chart.zeta_h();
      Matrix binv = chart.b.inverse();
      Matrix H = binv.transpose() * (Matrix::Identity(d[i], d[i]) + z * z.transpose()).inverse() * binv;
      CHECK(max_abs(Matrix(H - m.H[i])) <= 1e-9);
    }
  }
}

// ===========================================================================
// tangent metric
// ===========================================================================

TEST_CASE("rho derivative matches central differences") {
  Rng rng(13);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 3, 2});
  auto r = random_stable_rep<double>(q, dims, rng);
  auto v = random_rep<double>(q, dims, rng);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    auto rho = assemble_rho(q, dims, r, i, 2);
    Matrix plus = assemble_rho(q, dims, axpy(h, v, r), i, 2).matrix;
    Matrix minus = assemble_rho(q, dims, axpy(-h, v, r), i, 2).matrix;
    Matrix fd = (plus - minus) / (2 * h);
    CHECK(max_abs(Matrix(fd - rho_derivative(q, dims, r, rho, v))) <= 1e-7);
  }
  auto m = vertex_metrics(q, dims, r);
  auto dH = metric_derivative(q, dims, r, m, v);
  auto mp = vertex_metrics(q, dims, axpy(h, v, r));
  auto mm = vertex_metrics(q, dims, axpy(-h, v, r));
  for (std::size_t i = 0; i < 3; ++i) CHECK(max_abs(Matrix((mp.H[i] - mm.H[i]) / (2 * h) - dH[i])) <= 1e-6);
}

TEST_CASE("tangent metric: zero, gauge directions, positivity, symmetry") {
  Rng rng(14);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 3, 2});
  for (int t = 0; t < 20; ++t) {
    auto r = random_stable_rep<double>(q, dims, rng);
    auto m = vertex_metrics(q, dims, r);
    TangentMetricT<double> HT(q, dims, r, m);
    auto v = random_rep<double>(q, dims, rng);
    auto w = random_rep<double>(q, dims, rng);
    CHECK(HT(zero_rep<double>(q, dims), v) == 0.0);
    std::vector<Matrix> X;
    for (int d : dims.d) X.push_back(random_gaussian<double>(d, d, rng));
    auto gauge = gauge_direction(q, r, X);
    CHECK(std::abs(HT(gauge, gauge)) <= 1e-8);
    CHECK(std::abs(HT(gauge, v)) <= 1e-8);
    CHECK(HT(v, v) > 0);
    CHECK(std::abs(HT(v, w) - HT(w, v)) <= 1e-10);
    CHECK(std::abs(HT(scaled(3.0, v), w) - 3.0 * HT(v, w)) <= 1e-10 * (1 + std::abs(HT(v, w))));
  }
}

TEST_CASE("tangent metric: gram helper agrees with pairwise evaluation") {
  Rng rng(15);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({1, 2, 1});
  auto r = random_stable_rep<double>(q, dims, rng);
  auto m = vertex_metrics(q, dims, r);
  TangentMetricT<double> HT(q, dims, r, m);
  std::vector<FramedRep> dirs;
  for (int k = 0; k < 4; ++k) dirs.push_back(random_rep<double>(q, dims, rng));
  Matrix G = HT.gram(dirs);
  for (int k = 0; k < 4; ++k)
    for (int l = 0; l < 4; ++l) CHECK(std::abs(G(k, l) - HT(dirs[k], dirs[l])) <= 1e-10);
  CHECK(std::abs(tangent_metric(q, dims, r, m, dirs[0], dirs[1]) - G(0, 1)) <= 1e-12);
}

TEST_CASE("tangent metric: complex mode is Hermitian and kills gauge directions") {
  Rng rng(16);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 2, 1});
  auto r = random_stable_rep<Complex>(q, dims, rng);
  auto m = vertex_metrics(q, dims, r);
  TangentMetricT<Complex> HT(q, dims, r, m);
  auto v = random_rep<Complex>(q, dims, rng);
  auto w = random_rep<Complex>(q, dims, rng);
  CHECK(std::abs(HT(v, w) - std::conj(HT(w, v))) <= 1e-10);
  CHECK(HT(v, v).real() > 0);
  std::vector<CMatrix> X;
  for (int d : dims.d) X.push_back(random_gaussian<Complex>(d, d, rng));
  CHECK(std::abs(HT(gauge_direction(q, r, X), v)) <= 1e-8);
}

// ===========================================================================
// Grassmannian chart
// ===========================================================================

TEST_CASE("grassmann: p = 0 gives the identity metric") {
  GrassmannChart c{Matrix::Identity(2, 2), Matrix::Zero(2, 2)};
  CHECK(grassmann_metric_check(c) == 0.0);
}

TEST_CASE("grassmann: P1 recovers 1/(1+|zeta|^2)") {
  const double th = 0.7;
  GrassmannChart c{Matrix::Constant(1, 1, std::cos(th)), Matrix::Constant(1, 1, std::sin(th))};
  double zeta = std::tan(th);
  CHECK(c.zeta_h()(0, 0) == doctest::Approx(zeta));
  CHECK(std::cos(th) * std::cos(th) == doctest::Approx(1.0 / (1.0 + zeta * zeta)).epsilon(1e-14));
  CHECK(grassmann_metric_check(c) <= 1e-14);
}

TEST_CASE("grassmann: unitary-frame coordinates solve the moment equation") {
  Rng rng(17);
  for (int t = 0; t < 20; ++t) {
    auto c = random_on_level_grassmann<double>(2, 4, rng);
    Matrix zu = c.zeta_u();
    CHECK(max_abs(Matrix(c.b.transpose() * c.b + zu * zu.transpose() - Matrix::Identity(2, 2))) <= 1e-10);
    auto cc = random_on_level_grassmann<Complex>(2, 4, rng);
    CHECK(grassmann_metric_check(cc) <= 1e-10);
  }
}
