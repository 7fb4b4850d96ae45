#include <cmath>
#include <functional>

#include "doctest.h"
#include "quivernet/approx.hpp"
#include "quivernet/errors.hpp"

using namespace quivernet;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidInput;
}

Vector v1(double a) { return Vector::Constant(1, a); }
Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// Standard fan of P^2 at the origin, then two cuts: the chamber opposite
// (1,1), then the chamber opposite (-1,0).
WebSpec two_chamber_plane() {
  WebSpec s;
  s.n = 2;
  s.center = v2(0, 0);
  s.steps.push_back(WebStep{0, Cut{v2(-1, -1), 2.0}, 0.5});
  s.steps.push_back(WebStep{1, Cut{v2(1, -0.2), 2.5}, 0.3});
  return s;
}

}  // namespace

TEST_CASE("build_web: the fan and one step in R") {
  WebSpec s;
  s.n = 1;
  s.center = v1(0.2);
  auto fan = build_web(s);
  CHECK(fan.chamber_count() == 2);
  CHECK(fan.compact_count() == 0);
  CHECK(fan.rays.size() == 2);
  CHECK(fan.locate(v1(-3)) != fan.locate(v1(3)));

  s.steps.push_back(WebStep{1, Cut{v1(1), 1.0}, 0.3});
  auto w = build_web(s);
  CHECK(w.chamber_count() == 3);
  CHECK(w.compact_count() == 1);
  CHECK(w.centers.back()(0) == doctest::Approx(0.5));
  CHECK(w.locate(v1(0.6)) == w.compact_order.front());
  CHECK(w.locate(v1(1.0 + 1e-4), 1e-3) == -1);
  CHECK(w.wall_distance(v1(0.7)) == doctest::Approx(0.3));
}

TEST_CASE("build_web: two compact chambers in the plane") {
  auto w = build_web(two_chamber_plane());
  CHECK(w.chamber_count() == 5);
  CHECK(w.compact_count() == 2);
  CHECK(w.rays.size() == 3);
  CHECK(w.vertices.size() == 5);
  CHECK(w.segments.size() == 6);
  // Euler characteristic of a subdivision of the plane with unbounded edges
  const int edges = static_cast<int>(w.segments.size() + w.rays.size());
  CHECK(static_cast<int>(w.vertices.size()) - edges + w.chamber_count() == 1);
  for (int v : w.valence()) CHECK(v == 3);
  CHECK(w.centers.size() == 3);
  // each center sits in the union of compact chambers
  for (std::size_t k = 1; k < w.centers.size(); ++k) {
    const int c = w.locate(w.centers[k]);
    CHECK(w.chambers[c].compact);
  }
  // the lines of the outer rays meet at the last center
  for (const OuterRay& r : w.rays) {
    Vector off = w.centers.back() - r.base;
    CHECK(std::abs(r.dir(0) * off(1) - r.dir(1) * off(0)) <= 1e-12);
  }
}

TEST_CASE("build_web: rejected steps") {
  WebSpec s;
  s.n = 1;
  s.center = v1(0);
  s.steps.push_back(WebStep{1, Cut{v1(1), -1.0}, 0.1});
  CHECK(code_of([&] { build_web(s); }) == ErrorCode::NonTransverseCut);
  s.steps[0] = WebStep{1, Cut{v1(1), 1.0}, 2.0};
  CHECK(code_of([&] { build_web(s); }) == ErrorCode::CenterOutsideChambers);

  WebSpec p = two_chamber_plane();
  p.steps.resize(1);
  p.steps[0].cut = Cut{v2(1, -1), 2.0};  // parallel to neither ray but never closes the chamber
  CHECK(code_of([&] { build_web(p); }) == ErrorCode::NonTransverseCut);
  p.steps[0] = WebStep{0, Cut{v2(-1, -1), 2.0}, 5.0};
  CHECK(code_of([&] { build_web(p); }) == ErrorCode::CenterOutsideChambers);
  WebSpec bad;
  bad.n = 2;
  bad.center = v2(0, 0);
  bad.rays = {v2(1, 0), v2(0, 1), v2(1, 1)};
  CHECK(code_of([&] { build_web(bad); }) == ErrorCode::InvalidInput);
}

TEST_CASE("lift_web: one compact chamber in R") {
  WebSpec s;
  s.n = 1;
  s.center = v1(0.2);
  s.steps.push_back(WebStep{1, Cut{v1(1), 1.0}, 0.3});
  auto w = build_web(s);
  auto L = lift_web(w);
  CHECK(L.A.rows() == 2);
  CHECK(L.A.cols() == 1);
  Vector lo, hi;
  web_bounding_box(w, lo, hi);
  auto check = check_lift(w, L, lo, hi, 10000, 1e-3 * (hi - lo).norm());
  CHECK(check.tested > 9900);
  CHECK(check.fraction() >= 0.999);

  // The image line meets the three cones of the P^2 fan in turn and misses
  // the apex: along the line the winning cone changes exactly twice.
  int changes = 0, prev = fan_cone(L(v1(-50)));
  for (double x = -50; x <= 50; x += 1e-3) {
    const int c = fan_cone(L(v1(x)));
    if (c != prev) ++changes;
    prev = c;
  }
  CHECK(changes == 2);
  CHECK(fan_cone(L(v1(0.6))) == w.compact_order.front());
}

TEST_CASE("lift_web: uniform web in R has slopes 1 and 2") {
  // walls at 1/3 and 2/3, center at 1/2: l1 = x - 1/3, and the far chamber
  // adds (x - 2/3) with unit weight because l0 = l1 + lambda h at the center.
  auto w = build_web(uniform_web_1d(0, 1, 3));
  auto L = lift_web(w);
  CHECK(L.A(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(L.offset(0) == doctest::Approx(-1.0 / 3).epsilon(1e-14));
  CHECK(L.A(1, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(L.offset(1) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("lift_web: chambers in the plane") {
  auto w = build_web(two_chamber_plane());
  auto L = lift_web(w);
  CHECK(L.A.rows() == 4);
  Vector lo, hi;
  web_bounding_box(w, lo, hi);
  auto check = check_lift(w, L, lo, hi, 200, 1e-3 * (hi - lo).norm());
  CHECK(check.tested > 39000);
  CHECK(check.fraction() >= 0.999);
  // centers are where the non-compact functions tie
  Vector y = L(w.centers.back());
  Vector full(5);
  full << 0, y;
  std::vector<double> tops;
  for (int s : w.slots) tops.push_back(full(s));
  CHECK(tops[0] == doctest::Approx(tops[1]).epsilon(1e-10));
  CHECK(tops[1] == doctest::Approx(tops[2]).epsilon(1e-10));
}

TEST_CASE("polytope_to_simplex: square, triangle, hexagon") {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  auto samples = [&](int n) {
    std::vector<Vector> xs;
    for (int k = 0; k < 500; ++k) xs.push_back(v2(u(rng), u(rng)));
    xs.resize(n);
    return xs;
  };

  HPolytope square{Matrix(4, 2), Vector::Constant(4, 0.5)};
  square.A << 1, 0, -1, 0, 0, 1, 0, -1;
  auto es = polytope_to_simplex(square);
  CHECK(es.L.A.rows() == 3);
  CHECK(es.facets.rows() == 4);
  CHECK(simplex_embedding_residual(square, es, samples(500)) <= 1e-12);
  // a vertex of the square is tight on two facets of the simplex
  Vector z = es.facets * es.L(v2(0.5, 0.5));
  int tight = 0;
  for (int j = 0; j < 4; ++j) tight += std::abs(z(j) - 1) < 1e-12;
  CHECK(tight == 2);

  HPolytope tri{Matrix(3, 2), Vector::Ones(3)};
  tri.A << -1, 0, 0, -1, 1, 1;
  auto et = polytope_to_simplex(tri);
  CHECK(et.L.A.rows() == 2);
  CHECK(std::abs(et.L.A.determinant()) > 1e-6);
  CHECK(simplex_embedding_residual(tri, et, samples(500)) <= 1e-12);

  HPolytope hex{Matrix(6, 2), Vector::Ones(6)};
  for (int k = 0; k < 6; ++k) hex.A.row(k) << std::cos(k * M_PI / 3), std::sin(k * M_PI / 3);
  auto eh = polytope_to_simplex(hex);
  CHECK(eh.L.A.rows() == 5);
  CHECK(eh.facets.rows() == 6);
  CHECK(simplex_embedding_residual(hex, eh, samples(500)) <= 1e-12);

  HPolytope off = square;
  off.b(0) = -0.1;
  CHECK(code_of([&] { polytope_to_simplex(off); }) == ErrorCode::OriginNotInterior);
  HPolytope strip{Matrix(2, 2), Vector::Ones(2)};
  strip.A << 1, 0, -1, 0;
  CHECK(code_of([&] { polytope_to_simplex(strip); }) == ErrorCode::InvalidInput);
}

TEST_CASE("step_function_fit: constants and the identity") {
  auto w = build_web(uniform_web_1d(0, 1, 4));
  const Vector lo = v1(0), hi = v1(1);
  auto c = step_function_fit([](const Vector&) { return v1(2.5); }, lo, hi, w);
  for (std::size_t k = 0; k < c.value.size(); ++k) {
    CHECK(c.value[k](0) == 2.5);
    CHECK(c.deviation[k] == 0.0);
  }
  auto id = step_function_fit([](const Vector& x) { return x; }, lo, hi, w);
  for (int k = 0; k < w.chamber_count(); ++k) {
    CHECK(id.samples[k] == 256);
    const int at = w.locate(id.value[k]);
    CHECK(at == k);
    // chamber means are the midpoints of the quarters, deviation h/2
    const double mid = std::round((id.value[k](0) - 0.125) * 4) / 4 + 0.125;
    CHECK(id.value[k](0) == doctest::Approx(mid).epsilon(1e-12));
    CHECK(id.deviation[k] <= 0.125);
    CHECK(id.deviation[k] >= 0.125 - 0.25 / 256);
  }
  // finer webs fit a smooth function better
  auto f = [](const Vector& x) { return v1(std::sin(3 * x(0))); };
  double prev = 1e9;
  for (int chambers : {4, 8, 16, 32}) {
    auto web = build_web(uniform_web_1d(0, 1, chambers));
    const double e = step_l2_error(f, lo, hi, web, step_function_fit(f, lo, hi, web));
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("constructive_uat: constants are exact") {
  auto w = build_web(uniform_web_1d(0, 1, 5));
  for (double t : {1.0, 7.0}) {
    auto r = constructive_uat([](const Vector&) { return v1(-0.7); }, v1(0), v1(1), w, t);
    CHECK(r.l2_error <= 1e-12);
    CHECK(r.interpolation_residual <= 1e-10);
  }
}

TEST_CASE("constructive_uat: middle-third indicator against the closed form") {
  auto w = build_web(uniform_web_1d(0, 1, 3));
  auto f = [](const Vector& x) { return v1(x(0) >= 1.0 / 3 && x(0) < 2.0 / 3 ? 1.0 : 0.0); };
  double prev = 1e9;
  for (double t : {5.0, 10.0, 20.0}) {
    auto r = constructive_uat(f, v1(0), v1(1), w, t);
    CHECK(r.interpolation_residual <= 1e-10);
    CHECK(r.step_error <= 1e-2);
    // the network is the middle softmax weight with lifted values x - 1/3, 2x - 1
    double sum = 0;
    const int m = 200000;
    for (int k = 0; k < m; ++k) {
      const double x = (k + 0.5) / m;
      const double a = std::exp(2 * t * (x - 1.0 / 3)), b = std::exp(2 * t * (2 * x - 1));
      const double net = a / (1 + a + b);
      sum += (f(v1(x))(0) - net) * (f(v1(x))(0) - net) / m;
    }
    CHECK(r.l2_error == doctest::Approx(std::sqrt(sum)).epsilon(1e-3));
    CHECK(r.f_norm == doctest::Approx(std::sqrt(1.0 / 3)).epsilon(1e-3));
    CHECK(r.l2_error <= r.step_error + r.tail_error + r.wall_error + 1e-12);
    CHECK(r.l2_error < prev);
    prev = r.l2_error;
  }
  auto sweep = uat_sweep(f, v1(0), v1(1), w, {20.0, 5.0});
  CHECK(sweep[0].t == 20.0);
  CHECK(sweep[1].l2_error == constructive_uat(f, v1(0), v1(1), w, 5.0).l2_error);
}
