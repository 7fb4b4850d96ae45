#pragma once

#include <optional>
#include <vector>

#include "quivernet/representation.hpp"

namespace quivernet {

template <class S>
struct RhoMatrixT {
  std::size_t vertex = 0;
  std::vector<Path> paths;              // column blocks, in paths_into order
  std::vector<Eigen::Index> offsets;    // first column of each block
  Mat<S> matrix;                        // d_i x sum n_{t(gamma)}
  std::size_t max_len = 0;
};

template <class S>
struct MetricSetT {
  std::vector<Mat<S>> H;       // (rho rho*)^{-1}
  std::vector<Mat<S>> gram;    // rho rho*
  std::size_t truncation = 0;  // longest path length summed
  double tail_bound = 0;       // bound on |true gram - computed gram|_2 (0 when exact)
  bool cyclic = false;
  bool tail_certified = true;  // false when the bound is a decay-rate estimate
};

using RhoMatrix = RhoMatrixT<double>;
using MetricSet = MetricSetT<double>;

struct MetricOptions {
  std::optional<std::size_t> max_len;  // default: |Q0|-1 (acyclic) or tail-bound driven
  double tol = 1e-10;                  // tail bound target for cyclic quivers
  double singular_tol = 1e-12;         // smallest admissible eigenvalue of rho rho*
  bool require_stable = true;
  std::size_t max_truncation = 100000;
};

template <class S>
RhoMatrixT<S> assemble_rho(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                           std::size_t i, std::size_t max_len);

// Throws NotStable, OutsideDomain, SingularGram.
template <class S>
MetricSetT<S> vertex_metrics(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                             const MetricOptions& opts = {});

// max_i |gram_i - e e* - sum_{h(a)=i} V_a gram_{t(a)} V_a*|_max.
template <class S>
double gram_recursion_check(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                            const MetricSetT<S>& m);

// max_i |H_i(g.r) - g_i^{-*} H_i(r) g_i^{-1}|_max, divided by max(1, |g_i^{-*} H_i(r) g_i^{-1}|_max).
// H entries reach 1e6 for badly conditioned gauges, so an absolute residual
// would only measure rounding.
template <class S>
double equivariance_check(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                          const GaugeElementT<S>& g, const MetricOptions& opts = {});

// Directional derivative of rho_i along the tangent (dV, de), same layout as rho.
template <class S>
Mat<S> rho_derivative(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                      const RhoMatrixT<S>& rho, const FramedRepT<S>& tangent);

// Per-vertex derivative of H along the tangent: -H d(gram) H.
template <class S>
std::vector<Mat<S>> metric_derivative(const Quiver& q, const DimVectors& dims,
                                      const FramedRepT<S>& r, const MetricSetT<S>& m,
                                      const FramedRepT<S>& tangent);

// Tangent vector of the infinitesimal gauge X: dV_a = X_h V_a - V_a X_t, de_i = X_i e_i.
template <class S>
FramedRepT<S> gauge_direction(const Quiver& q, const FramedRepT<S>& r, const std::vector<Mat<S>>& X);

// Precomputed pieces for repeated tangent-metric evaluation at one point.
template <class S>
class TangentMetricT {
 public:
  TangentMetricT(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                 const MetricSetT<S>& m);
  S operator()(const FramedRepT<S>& v, const FramedRepT<S>& w) const;
  // Gram matrix G_kl = H_T(dirs[k], dirs[l]).
  Mat<S> gram(const std::vector<FramedRepT<S>>& dirs) const;

 private:
  const Quiver* q_;
  const DimVectors* dims_;
  const FramedRepT<S>* r_;
  std::vector<RhoMatrixT<S>> rho_;
  std::vector<Mat<S>> H_;
  std::vector<Mat<S>> frame_;  // rho* H^{1/2}
  std::vector<Mat<S>> derivs(const FramedRepT<S>& v) const;
};

template <class S>
S tangent_metric(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r,
                 const MetricSetT<S>& m, const FramedRepT<S>& v, const FramedRepT<S>& w);

// Point of Gr(n, k) in the chart e = (b p), b k x k, p k x (n-k).
template <class S>
struct GrassmannChartT {
  Mat<S> b;
  Mat<S> p;
  Mat<S> zeta_h() const;
  Mat<S> zeta_u() const;
};

using GrassmannChart = GrassmannChartT<double>;

// |(I + zeta_h zeta_h*)^{-1} - b* b|_max.
template <class S>
double grassmann_metric_check(const GrassmannChartT<S>& chart);

// Random chart point with b b* + p p* = I.
template <class S>
GrassmannChartT<S> random_on_level_grassmann(int k, int n, Rng& rng);

}  // namespace quivernet
