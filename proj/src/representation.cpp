#include "quivernet/representation.hpp"

#include <cmath>
#include <limits>

#include "quivernet/errors.hpp"

namespace quivernet {

template <class S>
void check_shapes(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r) {
  check_dims(q, dims);
  if (r.V.size() != q.num_arrows() || r.e.size() != q.num_vertices())
    fail(ErrorCode::ShapeMismatch, "representation does not match the quiver");
  for (std::size_t a = 0; a < q.num_arrows(); ++a)
    if (r.V[a].rows() != dims.d[q.head(a)] || r.V[a].cols() != dims.d[q.tail(a)])
      fail(ErrorCode::ShapeMismatch, "arrow '" + q.arrow(a).id + "' matrix has wrong shape");
  for (std::size_t i = 0; i < q.num_vertices(); ++i)
    if (r.e[i].rows() != dims.d[i] || r.e[i].cols() != dims.n[i])
      fail(ErrorCode::ShapeMismatch, "framing at vertex '" + q.vertex_id(i) + "' has wrong shape");
}

template <class S>
FramedRepT<S> zero_rep(const Quiver& q, const DimVectors& dims) {
  check_dims(q, dims);
  FramedRepT<S> r;
  for (const auto& a : q.arrows()) r.V.push_back(Mat<S>::Zero(dims.d[a.head], dims.d[a.tail]));
  for (std::size_t i = 0; i < q.num_vertices(); ++i) r.e.push_back(Mat<S>::Zero(dims.d[i], dims.n[i]));
  return r;
}

template <class S>
FramedRepT<S> random_rep(const Quiver& q, const DimVectors& dims, Rng& rng, double scale) {
  check_dims(q, dims);
  FramedRepT<S> r;
  for (const auto& a : q.arrows())
    r.V.push_back(random_gaussian<S>(dims.d[a.head], dims.d[a.tail], rng, scale));
  for (std::size_t i = 0; i < q.num_vertices(); ++i)
    r.e.push_back(random_gaussian<S>(dims.d[i], dims.n[i], rng, scale));
  return r;
}

template <class S>
FramedRepT<S> random_stable_rep(const Quiver& q, const DimVectors& dims, Rng& rng, double scale,
                                int max_tries) {
  for (int t = 0; t < max_tries; ++t) {
    auto r = random_rep<S>(q, dims, rng, scale);
    if (is_stable(q, dims, r)) return r;
  }
  fail(ErrorCode::NotStable, "no stable representation found by rejection sampling");
}

template <class S>
GaugeElementT<S> identity_gauge(const DimVectors& dims) {
  GaugeElementT<S> g;
  for (int di : dims.d) g.g.push_back(Mat<S>::Identity(di, di));
  g.unitary = true;
  return g;
}

template <class S>
GaugeElementT<S> random_gauge(const DimVectors& dims, Rng& rng) {
  GaugeElementT<S> g;
  for (int di : dims.d) {
    Mat<S> m;
    do {
      m = random_gaussian<S>(di, di, rng);
    } while (rcond(m) < 1e-3);
    g.g.push_back(m);
  }
  return g;
}

template <class S>
GaugeElementT<S> random_unitary_gauge(const DimVectors& dims, Rng& rng) {
  GaugeElementT<S> g;
  for (int di : dims.d) g.g.push_back(random_unitary<S>(di, rng));
  g.unitary = true;
  return g;
}

namespace {

template <class S>
Mat<S> checked_inverse(const Mat<S>& m, const std::string& where) {
  if (rcond(m) <= kInvertibilityTol) fail(ErrorCode::SingularGauge, "gauge component at " + where);
  return m.inverse();
}

}  // namespace

template <class S>
FramedRepT<S> act(const Quiver& q, const GaugeElementT<S>& g, const FramedRepT<S>& r) {
  if (g.g.size() != q.num_vertices()) fail(ErrorCode::ShapeMismatch, "gauge size");
  std::vector<Mat<S>> inv;
  for (std::size_t i = 0; i < g.g.size(); ++i)
    inv.push_back(g.unitary ? Mat<S>(g.g[i].adjoint()) : checked_inverse(g.g[i], q.vertex_id(i)));
  FramedRepT<S> out;
  for (std::size_t a = 0; a < q.num_arrows(); ++a)
    out.V.push_back(g.g[q.head(a)] * r.V[a] * inv[q.tail(a)]);
  for (std::size_t i = 0; i < q.num_vertices(); ++i) out.e.push_back(g.g[i] * r.e[i]);
  return out;
}

template <class S>
FramedRepT<S> act_on_frames(const FramedRepT<S>& r, const std::vector<Mat<S>>& u) {
  FramedRepT<S> out = r;
  for (std::size_t i = 0; i < r.e.size(); ++i) out.e[i] = r.e[i] * u[i];
  return out;
}

template <class S>
std::vector<Mat<S>> moment_map(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r) {
  check_shapes(q, dims, r);
  std::vector<Mat<S>> mu;
  for (std::size_t i = 0; i < q.num_vertices(); ++i) mu.push_back(r.e[i] * r.e[i].adjoint());
  for (std::size_t a = 0; a < q.num_arrows(); ++a) {
    mu[q.tail(a)] -= r.V[a].adjoint() * r.V[a];
    mu[q.head(a)] += r.V[a] * r.V[a].adjoint();
  }
  return mu;
}

template <class S>
double moment_residual(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r) {
  auto mu = moment_map(q, dims, r);
  double res = 0;
  for (auto& m : mu) res = std::max(res, max_abs(Mat<S>(m - Mat<S>::Identity(m.rows(), m.cols()))));
  return res;
}

namespace {

// Real basis of the Hermitian d x d matrices.
template <class S>
std::vector<Mat<S>> hermitian_basis(int d) {
  std::vector<Mat<S>> basis;
  for (int p = 0; p < d; ++p)
    for (int k = p; k < d; ++k) {
      Mat<S> m = Mat<S>::Zero(d, d);
      m(p, k) = 1;
      m(k, p) = 1;
      basis.push_back(m);
      if constexpr (is_complex<S>::value) {
        if (k != p) {
          Mat<S> c = Mat<S>::Zero(d, d);
          c(p, k) = S(0, 1);
          c(k, p) = S(0, -1);
          basis.push_back(c);
        }
      }
    }
  return basis;
}

// Derivative of mu along the infinitesimal gauge X (per-vertex Hermitian).
template <class S>
std::vector<Mat<S>> moment_differential(const Quiver& q, const FramedRepT<S>& r,
                                        const std::vector<Mat<S>>& X) {
  std::vector<Mat<S>> dmu;
  for (std::size_t i = 0; i < r.e.size(); ++i) {
    Mat<S> ee = r.e[i] * r.e[i].adjoint();
    dmu.push_back(X[i] * ee + ee * X[i]);
  }
  for (std::size_t a = 0; a < q.num_arrows(); ++a) {
    const Mat<S>& V = r.V[a];
    std::size_t h = q.head(a), t = q.tail(a);
    Mat<S> VVs = V * V.adjoint(), VsV = V.adjoint() * V;
    dmu[h] += X[h] * VVs + VVs * X[h] - 2.0 * V * X[t] * V.adjoint();
    dmu[t] -= 2.0 * V.adjoint() * X[h] * V - X[t] * VsV - VsV * X[t];
  }
  return dmu;
}

template <class S>
double real_trace_product(const Mat<S>& a, const Mat<S>& b) {
  return std::real((a.adjoint() * b).trace());
}

template <class S>
double squared_norm(const FramedRepT<S>& r) {
  double s = 0;
  for (auto& m : r.V) s += m.squaredNorm();
  for (auto& m : r.e) s += m.squaredNorm();
  return s;
}

}  // namespace

template <class S>
FramedRepT<S> project_to_moment_level(const Quiver& q, const DimVectors& dims,
                                      const FramedRepT<S>& r0, ProjectionOptions opts) {
  check_shapes(q, dims, r0);
  const std::size_t nv = q.num_vertices();
  std::vector<std::vector<Mat<S>>> basis(nv);
  std::size_t m = 0;
  for (std::size_t i = 0; i < nv; ++i) {
    basis[i] = hermitian_basis<S>(dims.d[i]);
    m += basis[i].size();
  }
  auto zero_X = [&]() {
    std::vector<Mat<S>> X;
    for (std::size_t i = 0; i < nv; ++i) X.push_back(Mat<S>::Zero(dims.d[i], dims.d[i]));
    return X;
  };

  // Kempf-Ness functional relative to r0: 0.5 |g.r0|^2 - sum log det g.
  FramedRepT<S> r = r0;
  double logdet = 0;
  auto psi = [&](const FramedRepT<S>& x, double ld) { return 0.5 * squared_norm(x) - ld; };

  for (int it = 0; it <= opts.max_iterations; ++it) {
    auto mu = moment_map(q, dims, r);
    std::vector<Mat<S>> grad;
    double res = 0;
    for (std::size_t i = 0; i < nv; ++i) {
      grad.push_back(mu[i] - Mat<S>::Identity(dims.d[i], dims.d[i]));
      res = std::max(res, max_abs(grad[i]));
    }
    if (res <= opts.tol) return r;
    if (it == opts.max_iterations) break;

    // Newton system: J x = -grad, J the Hessian of the functional in the
    // Hermitian basis (Gram-weighted so it is symmetric).
    Eigen::MatrixXd J(m, m);
    Eigen::VectorXd rhs(m);
    std::size_t col = 0;
    for (std::size_t i = 0; i < nv; ++i)
      for (const auto& Bk : basis[i]) {
        auto X = zero_X();
        X[i] = Bk;
        auto dmu = moment_differential(q, r, X);
        std::size_t row = 0;
        for (std::size_t j = 0; j < nv; ++j)
          for (const auto& Bl : basis[j]) J(row++, col) = real_trace_product(Bl, dmu[j]);
        rhs(col) = -real_trace_product(Bk, grad[i]);
        ++col;
      }
    J = 0.5 * (J + J.transpose());
    std::vector<Mat<S>> dir = zero_X();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(J);
    bool newton_ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (newton_ok) {
      Eigen::VectorXd x = ldlt.solve(rhs);
      newton_ok = x.allFinite();
      std::size_t k = 0;
      for (std::size_t i = 0; i < nv; ++i)
        for (const auto& Bk : basis[i]) dir[i] += x(k++) * Bk;
    }
    double slope = 0;
    for (std::size_t i = 0; i < nv; ++i) slope += real_trace_product(grad[i], dir[i]);
    if (!newton_ok || !(slope < 0)) {
      // Per-vertex step on log-eigenvalues of mu; always a descent direction.
      slope = 0;
      for (std::size_t i = 0; i < nv; ++i) {
        dir[i] = hermitian_function(mu[i], [](double l) { return -0.5 * std::log(std::max(l, 1e-3)); });
        slope += real_trace_product(grad[i], dir[i]);
      }
    }

    const double f0 = psi(r, logdet);
    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, alpha *= 0.5) {
      GaugeElementT<S> g;
      double ld = 0;
      for (std::size_t i = 0; i < nv; ++i) {
        g.g.push_back(hermitian_function(Mat<S>(alpha * dir[i]), [](double l) { return std::exp(l); }));
        ld += std::real(dir[i].trace()) * alpha;
      }
      // exp of a long step can be too badly conditioned for act; shorten it
      FramedRepT<S> cand;
      try {
        cand = act(q, g, r);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularGauge) throw;
        continue;
      }
      double f1 = psi(cand, logdet + ld);
      // Near the level the functional's decrease drowns in rounding, so a
      // smaller moment residual is accepted as progress too.
      bool progress = std::isfinite(f1) && (f1 <= f0 + 1e-4 * alpha * slope ||
                                            moment_residual(q, dims, cand) < 0.5 * res);
      if (progress) {
        r = std::move(cand);
        logdet += ld;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  fail(ErrorCode::NonConvergence, "moment-level projection did not reach tolerance");
}

namespace {

template <class S>
Mat<S> column_space(const Mat<S>& m) {
  if (m.cols() == 0 || m.rows() == 0) return Mat<S>(m.rows(), 0);
  Eigen::JacobiSVD<Mat<S>> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  double cut = kInvertibilityTol * std::max(1.0, s(0));
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cut) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace

template <class S>
bool is_stable(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r) {
  check_shapes(q, dims, r);
  std::vector<Mat<S>> span;
  for (std::size_t i = 0; i < q.num_vertices(); ++i) span.push_back(column_space(r.e[i]));
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t a = 0; a < q.num_arrows(); ++a) {
      std::size_t h = q.head(a), t = q.tail(a);
      if (span[h].cols() == dims.d[h] || span[t].cols() == 0) continue;
      Mat<S> joined(dims.d[h], span[h].cols() + span[t].cols());
      joined << span[h], r.V[a] * span[t];
      Mat<S> next = column_space(joined);
      if (next.cols() > span[h].cols()) {
        span[h] = next;
        grew = true;
      }
    }
  }
  for (std::size_t i = 0; i < q.num_vertices(); ++i)
    if (span[i].cols() != dims.d[i]) return false;
  return true;
}

template <class S>
GaugeElementT<S> chart_gauge(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r) {
  check_shapes(q, dims, r);
  GaugeElementT<S> g;
  for (std::size_t i = 0; i < q.num_vertices(); ++i) {
    if (dims.n[i] < dims.d[i])
      fail(ErrorCode::SingularFrame, "vertex '" + q.vertex_id(i) + "' has fewer framing columns than d");
    Mat<S> block = r.e[i].leftCols(dims.d[i]);
    if (rcond(block) <= kInvertibilityTol)
      fail(ErrorCode::SingularFrame, "framing block at vertex '" + q.vertex_id(i) + "' is singular");
    g.g.push_back(block.inverse());
  }
  return g;
}

template <class S>
ChartPointT<S> to_chart(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r) {
  FramedRepT<S> gauged = act(q, chart_gauge(q, dims, r), r);
  ChartPointT<S> c;
  c.W = gauged.V;
  for (std::size_t i = 0; i < q.num_vertices(); ++i)
    c.b.push_back(gauged.e[i].rightCols(dims.n[i] - dims.d[i]));
  return c;
}

template <class S>
FramedRepT<S> from_chart(const Quiver& q, const DimVectors& dims, const ChartPointT<S>& c) {
  check_dims(q, dims);
  if (c.W.size() != q.num_arrows() || c.b.size() != q.num_vertices())
    fail(ErrorCode::ShapeMismatch, "chart point does not match the quiver");
  FramedRepT<S> r;
  r.V = c.W;
  for (std::size_t i = 0; i < q.num_vertices(); ++i) {
    const int d = dims.d[i], n = dims.n[i];
    if (n < d || c.b[i].rows() != d || c.b[i].cols() != n - d)
      fail(ErrorCode::ShapeMismatch, "chart bias block at vertex '" + q.vertex_id(i) + "'");
    Mat<S> e(d, n);
    e << Mat<S>::Identity(d, d), c.b[i];
    r.e.push_back(e);
  }
  check_shapes(q, dims, r);
  return r;
}

template <class S>
double max_cycle_norm(const Quiver& q, const FramedRepT<S>& r) {
  double worst = 0;
  for (const Path& c : oriented_cycles(q, q.num_vertices())) {
    Mat<S> m = r.V[c.arrows.front()];
    for (std::size_t k = 1; k < c.arrows.size(); ++k) m = r.V[c.arrows[k]] * m;
    worst = std::max(worst, op_norm(m));
  }
  return worst;
}

template <class S>
bool in_domain_Mcirc(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r) {
  check_shapes(q, dims, r);
  return max_cycle_norm(q, r) < 1.0;
}

template <class S>
Mat<S> path_matrix(const Quiver&, const DimVectors& dims, const FramedRepT<S>& r, const Path& p) {
  Mat<S> m = Mat<S>::Identity(dims.d[p.start], dims.d[p.start]);
  for (std::size_t a : p.arrows) m = r.V[a] * m;
  return m;
}

template <class S>
FramedRepT<S> axpy(S alpha, const FramedRepT<S>& x, const FramedRepT<S>& y) {
  FramedRepT<S> out = y;
  for (std::size_t a = 0; a < x.V.size(); ++a) out.V[a] += alpha * x.V[a];
  for (std::size_t i = 0; i < x.e.size(); ++i) out.e[i] += alpha * x.e[i];
  return out;
}

template <class S>
FramedRepT<S> scaled(S alpha, const FramedRepT<S>& x) {
  FramedRepT<S> out = x;
  for (auto& m : out.V) m *= alpha;
  for (auto& m : out.e) m *= alpha;
  return out;
}

template <class S>
double max_abs_diff(const FramedRepT<S>& x, const FramedRepT<S>& y) {
  double d = 0;
  for (std::size_t a = 0; a < x.V.size(); ++a) d = std::max(d, max_abs(Mat<S>(x.V[a] - y.V[a])));
  for (std::size_t i = 0; i < x.e.size(); ++i) d = std::max(d, max_abs(Mat<S>(x.e[i] - y.e[i])));
  return d;
}

#define QUIVERNET_INSTANTIATE(S)                                                                   \
  template void check_shapes<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&);         \
  template FramedRepT<S> zero_rep<S>(const Quiver&, const DimVectors&);                          \
  template FramedRepT<S> random_rep<S>(const Quiver&, const DimVectors&, Rng&, double);          \
  template FramedRepT<S> random_stable_rep<S>(const Quiver&, const DimVectors&, Rng&, double, int); \
  template GaugeElementT<S> identity_gauge<S>(const DimVectors&);                                \
  template GaugeElementT<S> random_gauge<S>(const DimVectors&, Rng&);                            \
  template GaugeElementT<S> random_unitary_gauge<S>(const DimVectors&, Rng&);                    \
  template FramedRepT<S> act<S>(const Quiver&, const GaugeElementT<S>&, const FramedRepT<S>&);   \
  template FramedRepT<S> act_on_frames<S>(const FramedRepT<S>&, const std::vector<Mat<S>>&);     \
  template std::vector<Mat<S>> moment_map<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&); \
  template double moment_residual<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&);    \
  template FramedRepT<S> project_to_moment_level<S>(const Quiver&, const DimVectors&,            \
                                                    const FramedRepT<S>&, ProjectionOptions);    \
  template bool is_stable<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&);            \
  template ChartPointT<S> to_chart<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&);   \
  template FramedRepT<S> from_chart<S>(const Quiver&, const DimVectors&, const ChartPointT<S>&); \
  template GaugeElementT<S> chart_gauge<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&); \
  template double max_cycle_norm<S>(const Quiver&, const FramedRepT<S>&);                       \
  template bool in_domain_Mcirc<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&);      \
  template Mat<S> path_matrix<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&, const Path&); \
  template FramedRepT<S> axpy<S>(S, const FramedRepT<S>&, const FramedRepT<S>&);                 \
  template FramedRepT<S> scaled<S>(S, const FramedRepT<S>&);                                     \
  template double max_abs_diff<S>(const FramedRepT<S>&, const FramedRepT<S>&);

QUIVERNET_INSTANTIATE(double)
QUIVERNET_INSTANTIATE(Complex)

}  // namespace quivernet
