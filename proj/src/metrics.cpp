#include "quivernet/metrics.hpp"

#include <cmath>
#include <limits>

#include "quivernet/errors.hpp"

namespace quivernet {

template <class S>
RhoMatrixT<S> assemble_rho(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                           std::size_t i, std::size_t max_len) {
  RhoMatrixT<S> rho;
  rho.vertex = i;
  rho.max_len = max_len;
  rho.paths = paths_into(q, i, max_len);
  Eigen::Index width = 0;
  for (const Path& p : rho.paths) {
    rho.offsets.push_back(width);
    width += dims.n[p.start];
  }
  rho.matrix.resize(dims.d[i], width);
  for (std::size_t k = 0; k < rho.paths.size(); ++k) {
    const Path& p = rho.paths[k];
    Mat<S> block = r.e[p.start];
    for (std::size_t a : p.arrows) block = r.V[a] * block;
    rho.matrix.middleCols(rho.offsets[k], dims.n[p.start]) = block;
  }
  return rho;
}

namespace {

// Spectral radius of a small nonnegative matrix.
double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

template <class S>
struct LayeredSums {
  std::vector<std::vector<Mat<S>>> layers;  // layers[k][i] = sum over length-k paths

  void extend(const Quiver& q, const FramedRepT<S>& r) {
    const auto& prev = layers.back();
    std::vector<Mat<S>> next;
    for (std::size_t i = 0; i < prev.size(); ++i) next.push_back(Mat<S>::Zero(prev[i].rows(), prev[i].cols()));
    for (std::size_t a = 0; a < q.num_arrows(); ++a)
      next[q.head(a)] += r.V[a] * prev[q.tail(a)] * r.V[a].adjoint();
    for (auto& m : next) m = hermitian_part(m);
    layers.push_back(std::move(next));
  }

  double layer_norm(std::size_t k, std::size_t i) const {
    const Mat<S>& m = layers[k][i];
    if (m.size() == 0) return 0;
    Vector ev = hermitian_eigenvalues(m);
    return std::max(0.0, ev.maxCoeff());
  }
};

// Per-vertex p-step comparison matrix M_ij = sum over length-p paths j -> i of |V_gamma|^2.
template <class S>
Eigen::MatrixXd step_matrix(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                            std::size_t p, std::size_t path_cap, bool& too_many) {
  const std::size_t nv = q.num_vertices();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nv, nv);
  too_many = false;
  for (std::size_t i = 0; i < nv; ++i) {
    // Paths of exactly length p into i, built layer by layer.
    std::vector<Path> layer{Path{i, {}}};
    for (std::size_t len = 0; len < p; ++len) {
      std::vector<Path> next;
      for (const Path& path : layer)
        for (std::size_t a : q.arrows_into(path.start)) {
          Path ext{q.tail(a), {a}};
          ext.arrows.insert(ext.arrows.end(), path.arrows.begin(), path.arrows.end());
          next.push_back(std::move(ext));
        }
      layer = std::move(next);
      if (layer.size() > path_cap) {
        too_many = true;
        return M;
      }
    }
    for (const Path& path : layer) {
      double nrm = op_norm(path_matrix(q, dims, r, path));
      M(i, path.start) += nrm * nrm;
    }
  }
  return M;
}

}  // namespace

template <class S>
MetricSetT<S> vertex_metrics(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                             const MetricOptions& opts) {
  check_shapes(q, dims, r);
  if (opts.require_stable && !is_stable(q, dims, r))
    fail(ErrorCode::NotStable, "representation is not stable");
  const std::size_t nv = q.num_vertices();
  MetricSetT<S> out;
  auto topo = topological_order(q);
  out.cyclic = !topo.acyclic;

  if (topo.acyclic) {
    const std::size_t full = nv == 0 ? 0 : nv - 1;
    const std::size_t L = opts.max_len.value_or(full);
    out.truncation = L;
    for (std::size_t i = 0; i < nv; ++i) {
      auto rho = assemble_rho(q, dims, r, i, L);
      out.gram.push_back(hermitian_part(Mat<S>(rho.matrix * rho.matrix.adjoint())));
    }
    if (L < full) {
      for (std::size_t i = 0; i < nv; ++i) {
        auto rho = assemble_rho(q, dims, r, i, full);
        Mat<S> diff = rho.matrix * rho.matrix.adjoint() - out.gram[i];
        out.tail_bound = std::max(out.tail_bound, diff.size() ? op_norm(diff) : 0.0);
      }
    }
  } else {
    if (max_cycle_norm(q, r) >= 1.0)
      fail(ErrorCode::OutsideDomain, "an oriented cycle has operator norm >= 1");

    // Certified tail bound from the smallest p whose p-step comparison
    // matrix is contracting: n(k+p) <= M n(k) entrywise.
    std::size_t p_step = 0;
    Eigen::MatrixXd resolvent;
    for (std::size_t p = 1; p <= 2 * nv; ++p) {
      bool too_many = false;
      Eigen::MatrixXd M = step_matrix(q, dims, r, p, 20000, too_many);
      if (too_many) break;
      if (spectral_radius(M) < 1.0 - 1e-12) {
        p_step = p;
        resolvent = (Eigen::MatrixXd::Identity(nv, nv) - M).inverse();
        break;
      }
    }
    out.tail_certified = p_step > 0;

    LayeredSums<S> sums;
    std::vector<Mat<S>> first;
    for (std::size_t i = 0; i < nv; ++i) first.push_back(r.e[i] * r.e[i].adjoint());
    sums.layers.push_back(first);

    auto tail_after = [&](std::size_t L) {
      std::size_t need = L + std::max<std::size_t>(p_step, 1);
      while (sums.layers.size() <= need) sums.extend(q, r);
      if (p_step > 0) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(nv);
        for (std::size_t j = 1; j <= p_step; ++j)
          for (std::size_t i = 0; i < nv; ++i) acc(i) += sums.layer_norm(L + j, i);
        return (resolvent * acc).maxCoeff();
      }
      // Estimate from the observed per-layer decay ratio.
      double now = 0, before = 0;
      for (std::size_t i = 0; i < nv; ++i) {
        now = std::max(now, sums.layer_norm(L + 1, i));
        before = std::max(before, sums.layer_norm(L, i));
      }
      if (now == 0) return 0.0;
      double ratio = before > 0 ? now / before : 1.0;
      return ratio < 1 ? now / (1 - ratio) : std::numeric_limits<double>::infinity();
    };

    std::size_t L = 0;
    double tail = 0;
    if (opts.max_len) {
      L = *opts.max_len;
      tail = tail_after(L);
    } else {
      for (L = 0;; ++L) {
        tail = tail_after(L);
        if (tail < opts.tol) break;
        if (L >= opts.max_truncation)
          fail(ErrorCode::OutsideDomain, "path series did not reach the tail tolerance");
      }
    }
    out.truncation = L;
    double gram_norm = 0;
    for (std::size_t i = 0; i < nv; ++i) {
      Mat<S> g = Mat<S>::Zero(dims.d[i], dims.d[i]);
      for (std::size_t k = 0; k <= L; ++k) g += sums.layers[k][i];
      gram_norm = std::max(gram_norm, g.size() ? op_norm(g) : 0.0);
      out.gram.push_back(g);
    }
    // Floating-point accumulation over L+1 layers is part of the declared bound.
    const double eps = std::numeric_limits<double>::epsilon();
    out.tail_bound = tail + 8.0 * static_cast<double>(L + 1) * eps * gram_norm;
  }

  for (std::size_t i = 0; i < nv; ++i) {
    const Mat<S>& g = out.gram[i];
    if (g.size() == 0) {
      out.H.push_back(g);
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Mat<S>> es(g);
    const Vector& ev = es.eigenvalues();
    if (!(ev(0) > opts.singular_tol * std::max(1.0, ev(ev.size() - 1))))
      fail(ErrorCode::SingularGram, "rho rho* is singular at vertex '" + q.vertex_id(i) + "'");
    Vector inv = ev.cwiseInverse();
    out.H.push_back(hermitian_part(Mat<S>(es.eigenvectors() * inv.template cast<S>().asDiagonal() *
                                          es.eigenvectors().adjoint())));
  }
  return out;
}

template <class S>
double gram_recursion_check(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                            const MetricSetT<S>& m) {
  check_shapes(q, dims, r);
  double res = 0;
  for (std::size_t i = 0; i < q.num_vertices(); ++i) {
    Mat<S> rhs = r.e[i] * r.e[i].adjoint();
    for (std::size_t a : q.arrows_into(i)) rhs += r.V[a] * m.gram[q.tail(a)] * r.V[a].adjoint();
    res = std::max(res, max_abs(Mat<S>(m.gram[i] - rhs)));
  }
  return res;
}

template <class S>
double equivariance_check(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                          const GaugeElementT<S>& g, const MetricOptions& opts) {
  auto before = vertex_metrics(q, dims, r, opts);
  auto after = vertex_metrics(q, dims, act(q, g, r), opts);
  double res = 0;
  for (std::size_t i = 0; i < q.num_vertices(); ++i) {
    if (dims.d[i] == 0) continue;
    Mat<S> ginv = g.g[i].inverse();
    Mat<S> expected = ginv.adjoint() * before.H[i] * ginv;
    const double scale = std::max(1.0, max_abs(expected));
    res = std::max(res, max_abs(Mat<S>(after.H[i] - expected)) / scale);
  }
  return res;
}

template <class S>
Mat<S> rho_derivative(const Quiver&, const DimVectors& dims, const FramedRepT<S>& r,
                      const RhoMatrixT<S>& rho, const FramedRepT<S>& tangent) {
  Mat<S> out(rho.matrix.rows(), rho.matrix.cols());
  for (std::size_t k = 0; k < rho.paths.size(); ++k) {
    const Path& p = rho.paths[k];
    // Leibniz rule along the path: d(V_a P) = dV_a P + V_a dP.
    Mat<S> P = r.e[p.start];
    Mat<S> dP = tangent.e[p.start];
    for (std::size_t a : p.arrows) {
      dP = tangent.V[a] * P + r.V[a] * dP;
      P = r.V[a] * P;
    }
    out.middleCols(rho.offsets[k], dims.n[p.start]) = dP;
  }
  return out;
}

template <class S>
std::vector<Mat<S>> metric_derivative(const Quiver& q, const DimVectors& dims,
                                      const FramedRepT<S>& r, const MetricSetT<S>& m,
                                      const FramedRepT<S>& tangent) {
  std::vector<Mat<S>> dH;
  for (std::size_t i = 0; i < q.num_vertices(); ++i) {
    auto rho = assemble_rho(q, dims, r, i, m.truncation);
    Mat<S> drho = rho_derivative(q, dims, r, rho, tangent);
    Mat<S> dgram = drho * rho.matrix.adjoint();
    dgram += Mat<S>(dgram.adjoint());
    dH.push_back(-m.H[i] * dgram * m.H[i]);
  }
  return dH;
}

template <class S>
FramedRepT<S> gauge_direction(const Quiver& q, const FramedRepT<S>& r, const std::vector<Mat<S>>& X) {
  FramedRepT<S> t;
  for (std::size_t a = 0; a < q.num_arrows(); ++a)
    t.V.push_back(X[q.head(a)] * r.V[a] - r.V[a] * X[q.tail(a)]);
  for (std::size_t i = 0; i < q.num_vertices(); ++i) t.e.push_back(X[i] * r.e[i]);
  return t;
}

template <class S>
TangentMetricT<S>::TangentMetricT(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                                  const MetricSetT<S>& m)
    : q_(&q), dims_(&dims), r_(&r), H_(m.H) {
  for (std::size_t i = 0; i < q.num_vertices(); ++i) {
    rho_.push_back(assemble_rho(q, dims, r, i, m.truncation));
    Mat<S> half = hermitian_function(m.H[i], [](double l) { return std::sqrt(std::max(l, 0.0)); });
    frame_.push_back(rho_.back().matrix.adjoint() * half);
  }
}

template <class S>
std::vector<Mat<S>> TangentMetricT<S>::derivs(const FramedRepT<S>& v) const {
  std::vector<Mat<S>> d;
  for (std::size_t i = 0; i < rho_.size(); ++i) d.push_back(rho_derivative(*q_, *dims_, *r_, rho_[i], v));
  return d;
}

template <class S>
S TangentMetricT<S>::operator()(const FramedRepT<S>& v, const FramedRepT<S>& w) const {
  auto dv = derivs(v), dw = derivs(w);
  S total = 0;
  for (std::size_t i = 0; i < rho_.size(); ++i) {
    if (H_[i].size() == 0) continue;
    total += (dv[i].adjoint() * H_[i] * dw[i]).trace();
    Mat<S> a = dv[i] * frame_[i], b = dw[i] * frame_[i];
    total -= (a.adjoint() * H_[i] * b).trace();
  }
  return total;
}

template <class S>
Mat<S> TangentMetricT<S>::gram(const std::vector<FramedRepT<S>>& dirs) const {
  const std::size_t K = dirs.size();
  std::vector<std::vector<Mat<S>>> d(K), dp(K);
  for (std::size_t k = 0; k < K; ++k) {
    d[k] = derivs(dirs[k]);
    for (std::size_t i = 0; i < rho_.size(); ++i) dp[k].push_back(d[k][i] * frame_[i]);
  }
  Mat<S> G = Mat<S>::Zero(K, K);
  for (std::size_t i = 0; i < rho_.size(); ++i) {
    if (H_[i].size() == 0) continue;
    for (std::size_t k = 0; k < K; ++k) {
      Mat<S> Hd = H_[i] * d[k][i];
      Mat<S> Hdp = H_[i] * dp[k][i];
      for (std::size_t l = 0; l < K; ++l) {
        G(l, k) += (d[l][i].adjoint() * Hd).trace();
        G(l, k) -= (dp[l][i].adjoint() * Hdp).trace();
      }
    }
  }
  return G;
}

template <class S>
S tangent_metric(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                 const MetricSetT<S>& m, const FramedRepT<S>& v, const FramedRepT<S>& w) {
  return TangentMetricT<S>(q, dims, r, m)(v, w);
}

template <class S>
Mat<S> GrassmannChartT<S>::zeta_h() const {
  return b.inverse() * p;
}

template <class S>
Mat<S> GrassmannChartT<S>::zeta_u() const {
  Mat<S> bb = b.adjoint() * b;
  return hermitian_function(bb, [](double l) { return std::sqrt(std::max(l, 0.0)); }) * zeta_h();
}

template <class S>
double grassmann_metric_check(const GrassmannChartT<S>& chart) {
  const auto k = chart.b.rows();
  Mat<S> z = chart.zeta_h();
  Mat<S> metric = (Mat<S>::Identity(k, k) + z * z.adjoint()).inverse();
  return max_abs(Mat<S>(metric - chart.b.adjoint() * chart.b));
}

template <class S>
GrassmannChartT<S> random_on_level_grassmann(int k, int n, Rng& rng) {
  Mat<S> e;
  do {
    e = random_gaussian<S>(k, n, rng);
  } while (rcond(Mat<S>(e.leftCols(k))) < 1e-3);
  Mat<S> inv_half = hermitian_function(Mat<S>(e * e.adjoint()), [](double l) { return 1.0 / std::sqrt(l); });
  e = inv_half * e;
  return GrassmannChartT<S>{e.leftCols(k), e.rightCols(n - k)};
}

#define QUIVERNET_INSTANTIATE(S)                                                                     \
  template RhoMatrixT<S> assemble_rho<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&,   \
                                         std::size_t, std::size_t);                                \
  template MetricSetT<S> vertex_metrics<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&, \
                                           const MetricOptions&);                                  \
  template double gram_recursion_check<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&,  \
                                          const MetricSetT<S>&);                                   \
  template double equivariance_check<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&,    \
                                        const GaugeElementT<S>&, const MetricOptions&);            \
  template Mat<S> rho_derivative<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&,        \
                                    const RhoMatrixT<S>&, const FramedRepT<S>&);                   \
  template std::vector<Mat<S>> metric_derivative<S>(const Quiver&, const DimVectors&,              \
                                                    const FramedRepT<S>&, const MetricSetT<S>&,    \
                                                    const FramedRepT<S>&);                         \
  template FramedRepT<S> gauge_direction<S>(const Quiver&, const FramedRepT<S>&,                   \
                                            const std::vector<Mat<S>>&);                           \
  template class TangentMetricT<S>;                                                                \
  template S tangent_metric<S>(const Quiver&, const DimVectors&, const FramedRepT<S>&,             \
                               const MetricSetT<S>&, const FramedRepT<S>&, const FramedRepT<S>&);  \
  template struct GrassmannChartT<S>;                                                              \
  template double grassmann_metric_check<S>(const GrassmannChartT<S>&);                            \
  template GrassmannChartT<S> random_on_level_grassmann<S>(int, int, Rng&);

QUIVERNET_INSTANTIATE(double)
QUIVERNET_INSTANTIATE(Complex)

}  // namespace quivernet
