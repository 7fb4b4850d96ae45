// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "quivernet/approx.hpp"
#include "quivernet/metrics.hpp"
#include "quivernet/network.hpp"
#include "quivernet/topology.hpp"
#include "quivernet/toric.hpp"
#include "quivernet/trainer.hpp"

using namespace quivernet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Outcome metric_suite() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::uniform_int_distribution<int> dim(1, 4);
  const Quiver q = Quiver::chain(3);
  double min_h = INFINITY, equiv = 0, gram = 0, level = INFINITY;
  for (int k = 0; k < 100; ++k) {
    const auto dims = DimVectors::with_bias_framing({dim(rng), dim(rng), dim(rng)});
    const auto r = random_stable_rep<double>(q, dims, rng);
    const auto m = vertex_metrics(q, dims, r);
    for (const Matrix& H : m.H) min_h = std::min(min_h, min_eigenvalue(H));
    equiv = std::max(equiv, equivariance_check(q, dims, r, random_gauge<double>(dims, rng)));
    gram = std::max(gram, gram_recursion_check(q, dims, r, m));
    const auto on = project_to_moment_level(q, dims, r);
    const auto mo = vertex_metrics(q, dims, on);
    for (const Matrix& G : mo.gram)
      level = std::min(level, min_eigenvalue(Matrix(G - Matrix::Identity(G.rows(), G.cols()))));
  }
  const double secs = seconds_since(t0);
  const bool ok = min_h > 0 && equiv <= 1e-8 && gram <= 1e-10 && level >= -1e-8 && secs < 10;
  return {ok, "min eig H " + fmt("%.3g", min_h) + ", equivariance " + fmt("%.3g", equiv) + ", recursion " +
                  fmt("%.3g", gram) + ", min eig(gram-I) on level " + fmt("%.3g", level) + ", " +
                  fmt("%.2f", secs) + " s"};
}

Outcome grassmann() {
  Rng rng(2);
  double worst = 0;
  for (int k = 0; k < 100; ++k) worst = std::max(worst, grassmann_metric_check(random_on_level_grassmann<double>(2, 4, rng)));
  return {worst <= 1e-10, "max |(I+zz*)^-1 - b*b| = " + fmt("%.3g", worst)};
}

Outcome ricci_metric() {
  Rng rng(3);
  const Quiver q = Quiver::chain(3);
  const auto dims = DimVectors::with_bias_framing({2, 3, 2});
  double gauge = 0, asym = 0, min_vv = INFINITY;
  for (int k = 0; k < 10; ++k) {
    const auto r = random_stable_rep<double>(q, dims, rng);
    const auto m = vertex_metrics(q, dims, r);
    TangentMetricT<double> HT(q, dims, r, m);
    for (int j = 0; j < 10; ++j) {
      const auto v = random_rep<double>(q, dims, rng);
      const auto w = random_rep<double>(q, dims, rng);
      std::vector<Matrix> X;
      for (int d : dims.d) X.push_back(random_gaussian<double>(d, d, rng));
      const auto g = gauge_direction(q, r, X);
      gauge = std::max({gauge, std::abs(HT(g, g)), std::abs(HT(g, v))});
      asym = std::max(asym, std::abs(HT(v, w) - HT(w, v)));
      min_vv = std::min(min_vv, HT(v, v));
    }
  }
  return {gauge <= 1e-8 && asym <= 1e-10 && min_vv > 0,
          "gauge " + fmt("%.3g", gauge) + ", min H_T(v,v) " + fmt("%.3g", min_vv) + ", asymmetry " + fmt("%.3g", asym)};
}

Outcome cyclic_truncation() {
  const Quiver q = Quiver::from_spec({{"1"}, {{"l", "1", "1"}}});
  const DimVectors dims{{1}, {1}};
  const FramedRep r{{Matrix::Constant(1, 1, 0.5)}, {Matrix::Constant(1, 1, 1.0)}};
  bool ok = true;
  std::string detail;
  for (std::size_t L : {10, 20, 40}) {
    MetricOptions opts;
    opts.max_len = L;
    const auto m = vertex_metrics(q, dims, r, opts);
    const double err = std::abs(m.gram[0](0, 0) - 1.0 / (1.0 - 0.25));
    ok = ok && err <= m.tail_bound;
    detail += "L=" + std::to_string(L) + ": err " + fmt("%.3g", err) + " <= bound " + fmt("%.3g", m.tail_bound) + "; ";
  }
  return {ok, detail};
}

Outcome symplectomorphism() {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0, 1), ang(0, 2 * M_PI);
  std::vector<Vector> samples;
  for (int k = 0; k < 100; ++k) {
    const double rad = 3 * std::sqrt(u(rng)), a = ang(rng);
    samples.push_back(vec2(rad * std::cos(a), rad * std::sin(a)));
  }
  const double worst = sympl_pullback_check(PullbackMap::PsiDisc, samples, 1e-5);
  return {worst <= 1e-5, "max density error " + fmt("%.3g", worst)};
}

// Limit point of the cone containing x for the P^2 fan with x_0 = 0: the
// tied maximal coordinates share 1/l.
Vector expected_limit(const Vector& x) {
  const double s[3] = {0.0, x(0), x(1)};
  const double top = std::max({s[0], s[1], s[2]});
  int l = 0;
  for (double v : s) l += v == top;
  Vector p = Vector::Zero(2);
  for (int i = 1; i <= 2; ++i)
    if (s[i] == top) p(i - 1) = 1.0 / l;
  return p;
}

Outcome tropical_limits() {
  const Fan fan = Fan::from_polytope(MomentPolytope::from_preset("Pd", 2));
  Rng rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  int tested = 0, exact = 0, within = 0;
  while (tested < 100) {
    const Vector x = vec2(u(rng), u(rng));
    // Euclidean distance to the walls x1 = 0, x2 = 0 and x1 = x2
    const double s[3] = {0.0, x(0), x(1)};
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (s[i] > s[best]) best = i;
    double margin = INFINITY;
    for (int i = 0; i < 3; ++i)
      if (i != best) margin = std::min(margin, (s[best] - s[i]) / ((best == 0 || i == 0) ? 1.0 : std::sqrt(2.0)));
    if (margin < 0.1) continue;
    ++tested;
    const auto lim = fan.sigma_infinity(x);
    const Vector p = expected_limit(x);
    if (lim.kind == TropicalLimit::Kind::Point && lim.point == p) ++exact;
    const double err = (sigma_simplex(20 * x) - p).norm();
    worst = std::max(worst, err);
    within += err <= 1e-3;
  }
  // lower-dimensional cones
  int strata = 0, strata_ok = 0;
  for (const Vector& x : {vec2(0.7, 0.7), vec2(0.0, -0.5), vec2(-0.5, 0.0), vec2(0.0, 0.0)}) {
    ++strata;
    const auto lim = fan.sigma_infinity(x);
    if (lim.kind == TropicalLimit::Kind::Point && (lim.point - expected_limit(x)).norm() <= 1e-15) ++strata_ok;
  }
  const bool ok = worst <= 1e-3 && exact == tested && strata_ok == strata;
  return {ok, "max |sigma(20x) - p_C| = " + fmt("%.3g", worst) + " (" + std::to_string(within) +
                  "/100 within 1e-3), limit points exact " + std::to_string(exact) + "/100, strata " +
                  std::to_string(strata_ok) + "/" + std::to_string(strata)};
}

Outcome topology() {
  const auto t0 = Clock::now();
  const auto pattern = parse_pattern("600,m,m,m,10");
  FactorCache cache;
  SweepOptions opts;
  opts.cache = &cache;
  const auto a = chi_sweep(ChainKind::A, pattern, 1, 64, opts);
  const auto ap = chi_sweep(ChainKind::Aprime, pattern, 1, 64, opts);
  const auto rows = emit_chi_plot(a, ap);
  const double secs = seconds_since(t0);
  bool consistent = true;
  for (const auto* s : {&a, &ap})
    for (const SweepPoint& p : *s) consistent = consistent && p.chi_matches_poincare && p.palindromic;
  int matched = 0, below = 0;
  for (const ChiRow& r : rows)
    if (r.log_chi_a && r.log_chi_aprime) {
      ++matched;
      below += *r.log_chi_aprime < *r.log_chi_a;
    }
  const bool ok = consistent && matched > 0 && below == matched && secs < 5;
  return {ok, "A' below A at " + std::to_string(below) + "/" + std::to_string(matched) +
                  " matched dimensions, closed form and palindromes " + (consistent ? "ok" : "FAILED") + ", " +
                  fmt("%.2f", secs) + " s"};
}

Outcome small_weights() {
  Rng rng(8);
  const Quiver q = Quiver::chain(3);
  const DimVectors dims{{1, 8, 1}, {1, 9, 1}};
  auto capped = [&](int r, int c) {
    Matrix m = random_gaussian<double>(r, c, rng);
    return Matrix(m * (1e-2 / m.norm()));
  };
  ChartPoint c{{capped(8, 1), capped(1, 8)}, {Matrix(1, 0), capped(8, 1), Matrix(1, 0)}};
  const auto r = from_chart(q, dims, c);
  const auto m = vertex_metrics(q, dims, r);
  const IOSpec io = chain_iospec(q);
  double worst = 0;
  for (int k = 0; k < 32; ++k) {
    const Vector s = Vector::Constant(1, k / 31.0);
    const Vector flat = eval_f_U(c.W[0], c.W[1], c.b[1].col(0), sigma_simplex, s);
    worst = std::max(worst, (eval_f_tilde(q, dims, r, m, io, s) - flat).lpNorm<Eigen::Infinity>());
  }
  return {worst <= 1e-3, "max |f~ - f^U| = " + fmt("%.3g", worst)};
}

Outcome training() {
  const Quiver q = Quiver::chain(3);
  const DimVectors dims{{1, 8, 1}, {1, 9, 1}};
  const IOSpec io = chain_iospec(q, ActivationKind::SigmaFramed);
  Matrix X(64, 1), Y(64, 1);
  for (int k = 0; k < 64; ++k) {
    X(k, 0) = k / 63.0;
    Y(k, 0) = std::sin(2 * M_PI * X(k, 0));
  }
  const Samples data = dataset_samples(X, Y);
  TrainConfig cfg;
  cfg.steps = 5000;
  cfg.step_size = 1e-2;
  cfg.seed = 1;
  const auto t0 = Clock::now();
  const auto a = train(q, dims, io, data, cfg);
  const double secs = seconds_since(t0);
  const auto b = train(q, dims, io, data, cfg);
  const bool same = a.loss_trace == b.loss_trace && a.grad_norm_trace == b.grad_norm_trace;
  const double ratio = a.loss_trace.back() / a.loss_trace.front();
  return {ratio <= 0.1 && same && secs < 60,
          "loss " + fmt("%.4g", a.loss_trace.front()) + " -> " + fmt("%.4g", a.loss_trace.back()) + " (ratio " +
              fmt("%.3g", ratio) + ") in " + std::to_string(a.steps_taken) + " steps, replay " +
              (same ? "identical" : "DIFFERS") + ", " + fmt("%.1f", secs) + " s"};
}

Outcome constructive_approximation() {
  const CenteredWeb web = build_web(uniform_web_1d(0, 1, 3));
  auto f = [](const Vector& x) { return Vector::Constant(1, x(0) >= 1.0 / 3 && x(0) < 2.0 / 3 ? 1.0 : 0.0); };
  const auto runs = uat_sweep(f, Vector::Zero(1), Vector::Ones(1), web, {5, 10, 20});
  bool monotone = true;
  for (std::size_t k = 1; k < runs.size(); ++k) monotone = monotone && runs[k].l2_error <= 1.05 * runs[k - 1].l2_error;
  const double ratio = runs.back().l2_error / runs.back().f_norm;
  std::ostringstream d;
  d << "t=20 error/|f| = " << fmt("%.3g", ratio) << " (need <= 0.05), monotone " << (monotone ? "yes" : "NO") << ";";
  for (const UatResult& r : runs)
    d << " t=" << r.t << " [total " << fmt("%.3g", r.l2_error) << ", step " << fmt("%.3g", r.step_error) << ", tail "
      << fmt("%.3g", r.tail_error) << ", wall " << fmt("%.3g", r.wall_error) << "]";
  return {ratio <= 0.05 && monotone, d.str()};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"metric suite on random A3 representations", metric_suite},
      {"Grassmannian chart metric", grassmann},
      {"Ricci tangent metric", ricci_metric},
      {"cyclic quiver truncation", cyclic_truncation},
      {"disc map pulls back Fubini-Study", symplectomorphism},
      {"tropical limits on the P2 fan", tropical_limits},
      {"Euler characteristic sweep", topology},
      {"small weights agree with the flat network", small_weights},
      {"training sin(2 pi x)", training},
      {"constructive approximation of a step", constructive_approximation},
  };
  int failures = 0, k = 0;
  for (const auto& [name, check] : criteria) {
    ++k;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", k - failures, k);
  return failures;
}
