#include "doctest.h"
#include "quivernet/errors.hpp"
#include "quivernet/representation.hpp"
#include "support.hpp"

using namespace quivernet;
using namespace qn_test;

namespace {

FramedRep a2_rep(const Matrix& V, const Matrix& e1, const Matrix& e2) {
  FramedRep r;
  r.V = {V};
  r.e = {e1, e2};
  return r;
}

}  // namespace

// ===========================================================================
// act
// ===========================================================================

TEST_CASE("act: identity leaves the rep unchanged") {
  Rng rng(1);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 3, 1});
  auto r = random_rep<double>(q, dims, rng);
  CHECK(max_abs_diff(act(q, identity_gauge<double>(dims), r), r) == 0.0);
}

TEST_CASE("act: scalar gauge on a single vertex") {
  auto q = single_vertex();
  DimVectors dims{{2}, {2}};
  FramedRep r{{}, {Matrix::Identity(2, 2)}};
  GaugeElement g{{2.0 * Matrix::Identity(2, 2)}};
  CHECK(max_abs(Matrix(act(q, g, r).e[0] - 2.0 * Matrix::Identity(2, 2))) == 0.0);
}

TEST_CASE("act: A2 against a hand computation") {
  auto q = a2();
  Matrix V(2, 2), g1(2, 2), g2(2, 2);
  V << 1, 2, 3, 4;
  g1 << 2, 1, 1, 1;  // inverse (1 -1; -1 2)
  g2 << 0, 1, 1, 0;
  auto r = a2_rep(V, Matrix::Identity(2, 3), Matrix::Identity(2, 3));
  auto out = act(q, GaugeElement{{g1, g2}}, r);
  // g2 V g1^{-1} = swap rows of V * (1 -1; -1 2) = (3 4; 1 2)(1 -1; -1 2)
  Matrix expected(2, 2);
  expected << -1, 5, -1, 3;
  CHECK(max_abs(Matrix(out.V[0] - expected)) < 1e-14);
  CHECK(max_abs(Matrix(out.e[1] - g2 * Matrix::Identity(2, 3))) == 0.0);
}

TEST_CASE("act: singular gauge is rejected") {
  auto q = single_vertex();
  DimVectors dims{{2}, {2}};
  FramedRep r{{}, {Matrix::Identity(2, 2)}};
  GaugeElement g{{Matrix::Zero(2, 2)}};
  CHECK_THROWS_AS(act(q, g, r), Error);
}

// ===========================================================================
// moment_map
// ===========================================================================

TEST_CASE("moment_map: single vertex with orthonormal framing") {
  auto q = single_vertex();
  DimVectors dims{{2}, {3}};
  Matrix e = Matrix::Zero(2, 3);
  e(0, 1) = 1;
  e(1, 2) = 1;
  auto mu = moment_map(q, dims, FramedRep{{}, {e}});
  CHECK(max_abs(Matrix(mu[0] - Matrix::Identity(2, 2))) == 0.0);
}

TEST_CASE("moment_map: zero rep") {
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({1, 2, 3});
  for (const auto& m : moment_map(q, dims, zero_rep<double>(q, dims))) CHECK(max_abs(m) == 0.0);
}

TEST_CASE("moment_map: A2 term by term") {
  Rng rng(3);
  auto q = a2();
  auto dims = DimVectors::with_bias_framing({2, 3});
  auto r = random_rep<double>(q, dims, rng);
  auto mu = moment_map(q, dims, r);
  const Matrix& V = r.V[0];
  Matrix mu1 = Matrix::Zero(2, 2), mu2 = Matrix::Zero(3, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 3; ++k) mu1(i, j) += r.e[0](i, k) * r.e[0](j, k);
      for (int k = 0; k < 3; ++k) mu1(i, j) -= V(k, i) * V(k, j);
    }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 4; ++k) mu2(i, j) += r.e[1](i, k) * r.e[1](j, k);
      for (int k = 0; k < 2; ++k) mu2(i, j) += V(i, k) * V(j, k);
    }
  CHECK(max_abs(Matrix(mu[0] - mu1)) < 1e-12);
  CHECK(max_abs(Matrix(mu[1] - mu2)) < 1e-12);
}

TEST_CASE("moment_map: unitary equivariance") {
  Rng rng(4);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 3, 2});
  for (int t = 0; t < 20; ++t) {
    auto r = random_rep<double>(q, dims, rng);
    auto u = random_unitary_gauge<double>(dims, rng);
    auto mu = moment_map(q, dims, r);
    auto mu_u = moment_map(q, dims, act(q, u, r));
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(max_abs(Matrix(mu_u[i] - u.g[i] * mu[i] * u.g[i].transpose())) <= 1e-10);
  }
}

// ===========================================================================
// project_to_moment_level
// ===========================================================================

TEST_CASE("project: single vertex e = 2I becomes e = I") {
  auto q = single_vertex();
  DimVectors dims{{2}, {2}};
  FramedRep r{{}, {2.0 * Matrix::Identity(2, 2)}};
  auto p = project_to_moment_level(q, dims, r);
  CHECK(max_abs(Matrix(p.e[0] - Matrix::Identity(2, 2))) < 1e-10);
}

TEST_CASE("project: a point on the level is a fixed point") {
  Rng rng(5);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 2, 1});
  auto r = project_to_moment_level(q, dims, random_stable_rep<double>(q, dims, rng));
  auto again = project_to_moment_level(q, dims, r);
  CHECK(max_abs_diff(r, again) < 1e-9);
}

TEST_CASE("project: random stable A3 reps reach mu = I") {
  Rng rng(6);
  auto q = a3();
  for (int t = 0; t < 30; ++t) {
    std::uniform_int_distribution<int> dist(1, 4);
    auto dims = DimVectors::with_bias_framing({dist(rng), dist(rng), dist(rng)});
    auto r = random_stable_rep<double>(q, dims, rng);
    auto p = project_to_moment_level(q, dims, r);
    CHECK(moment_residual(q, dims, p) <= 1e-8);
  }
}

TEST_CASE("project: wide hidden layer survives long Newton steps") {
  // draw 70 of this sequence once produced a gauge with rcond below 1e-10
  Rng rng(7);
  auto q = a3();
  DimVectors dims{{1, 8, 1}, {1, 9, 1}};
  for (int t = 0; t < 72; ++t) {
    auto r = random_stable_rep<double>(q, dims, rng);
    random_gauge<double>(dims, rng);
    auto p = project_to_moment_level(q, dims, r);
    CHECK(moment_residual(q, dims, p) <= 1e-8);
  }
}

TEST_CASE("project: complex mode") {
  Rng rng(7);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 3, 2});
  auto r = random_stable_rep<Complex>(q, dims, rng);
  auto p = project_to_moment_level(q, dims, r);
  CHECK(moment_residual(q, dims, p) <= 1e-8);
}

TEST_CASE("project: unstable rep does not converge") {
  auto q = single_vertex();
  DimVectors dims{{1}, {1}};
  FramedRep r{{}, {Matrix::Zero(1, 1)}};
  CHECK_THROWS_AS(project_to_moment_level(q, dims, r), Error);
}

// ===========================================================================
// is_stable
// ===========================================================================

TEST_CASE("is_stable: single vertex") {
  auto q = single_vertex();
  Matrix e(2, 3);
  e << 1, 0, 1, 0, 1, 1;
  CHECK(is_stable(q, DimVectors{{2}, {3}}, FramedRep{{}, {e}}));
  CHECK_FALSE(is_stable(q, DimVectors{{1}, {1}}, FramedRep{{}, {Matrix::Zero(1, 1)}}));
}

TEST_CASE("is_stable: A2 reaches V2 through the arrow") {
  auto q = a2();
  DimVectors dims{{2, 2}, {2, 2}};
  Matrix V(2, 2);
  V << 1, 1, 0, 1;
  CHECK(is_stable(q, dims, a2_rep(V, Matrix::Identity(2, 2), Matrix::Zero(2, 2))));
  Matrix rank1(2, 2);
  rank1 << 1, 1, 1, 1;
  CHECK_FALSE(is_stable(q, dims, a2_rep(rank1, Matrix::Identity(2, 2), Matrix::Zero(2, 2))));
}

TEST_CASE("is_stable: gauge invariant and generic") {
  Rng rng(8);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({3, 2, 4});
  for (int t = 0; t < 100; ++t) {
    auto r = random_rep<double>(q, dims, rng);
    bool s = is_stable(q, dims, r);
    CHECK(s);
    CHECK(is_stable(q, dims, act(q, random_gauge<double>(dims, rng), r)) == s);
  }
  // a framing that misses part of V3 and an arrow that cannot fill it
  DimVectors tight{{1, 1, 2}, {1, 1, 0}};
  auto r = random_rep<double>(q, tight, rng);
  CHECK_FALSE(is_stable(q, tight, r));
}

// ===========================================================================
// chart U
// ===========================================================================

TEST_CASE("chart: rep already in chart gauge") {
  Rng rng(9);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({1, 3, 2});
  ChartPoint c;
  for (const auto& a : q.arrows()) c.W.push_back(random_gaussian<double>(dims.d[a.head], dims.d[a.tail], rng));
  for (int d : dims.d) c.b.push_back(random_gaussian<double>(d, 1, rng));
  auto r = from_chart(q, dims, c);
  auto back = to_chart(q, dims, r);
  for (std::size_t a = 0; a < 2; ++a) CHECK(max_abs(Matrix(back.W[a] - c.W[a])) < 1e-14);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(max_abs(Matrix(back.b[i] - c.b[i])) < 1e-14);
    CHECK(max_abs(Matrix(r.e[i].leftCols(dims.d[i]) - Matrix::Identity(dims.d[i], dims.d[i]))) == 0.0);
  }
}

TEST_CASE("chart: head framing block 2I halves W") {
  auto q = a2();
  DimVectors dims{{2, 2}, {2, 3}};
  Matrix M(2, 2);
  M << 1, 2, 3, 4;
  Matrix e2(2, 3);
  e2 << 2, 0, 4, 0, 2, 6;
  auto c = to_chart(q, dims, a2_rep(M, Matrix::Identity(2, 2), e2));
  CHECK(max_abs(Matrix(c.W[0] - M / 2)) < 1e-14);
  Matrix b(2, 1);
  b << 2, 3;
  CHECK(max_abs(Matrix(c.b[1] - b)) < 1e-14);
}

TEST_CASE("chart: round trip through the inverting gauge") {
  Rng rng(10);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 3, 2});
  for (int t = 0; t < 20; ++t) {
    auto r = random_rep<double>(q, dims, rng);
    auto g = chart_gauge(q, dims, r);
    auto chart_rep = from_chart(q, dims, to_chart(q, dims, r));
    GaugeElement inverse;
    for (auto& gi : g.g) inverse.g.push_back(gi.inverse());
    CHECK(max_abs_diff(act(q, inverse, chart_rep), r) < 1e-12);
  }
}

TEST_CASE("chart: singular framing block") {
  auto q = single_vertex();
  DimVectors dims{{2}, {3}};
  Matrix e = Matrix::Zero(2, 3);
  e(0, 0) = 1;
  e(1, 2) = 1;
  try {
    to_chart(q, dims, FramedRep{{}, {e}});
    FAIL("expected SingularFrame");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::SingularFrame);
  }
}

// ===========================================================================
// in_domain_Mcirc
// ===========================================================================

TEST_CASE("in_domain: acyclic, loop 0.5, loop 1.5") {
  Rng rng(11);
  auto q = a3();
  auto dims = DimVectors::with_bias_framing({2, 2, 2});
  CHECK(in_domain_Mcirc(q, dims, random_rep<double>(q, dims, rng, 10.0)));
  DimVectors ld{{1}, {1}};
  FramedRep r{{Matrix::Constant(1, 1, 0.5)}, {Matrix::Ones(1, 1)}};
  CHECK(in_domain_Mcirc(loop(), ld, r));
  r.V[0](0, 0) = 1.5;
  CHECK_FALSE(in_domain_Mcirc(loop(), ld, r));
}

TEST_CASE("in_domain: two-cycle uses the product, not the factors") {
  auto q = make_quiver({"1", "2"}, {{"a", "1", "2"}, {"b", "2", "1"}});
  DimVectors dims{{1, 1}, {1, 1}};
  FramedRep r{{Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 0.2)}, {Matrix::Ones(1, 1), Matrix::Ones(1, 1)}};
  CHECK(in_domain_Mcirc(q, dims, r));  // |ab| = 0.6
  r.V[1](0, 0) = 0.4;
  CHECK_FALSE(in_domain_Mcirc(q, dims, r));  // 1.2
}
