#pragma once

#include <vector>

#include "quivernet/linalg.hpp"
#include "quivernet/quiver.hpp"

namespace quivernet {

// A point of R_{n,d}: V[a] is d_{h(a)} x d_{t(a)}, e[i] is d_i x n_i.
// The same shape doubles as a tangent vector (dV, de).
template <class S>
struct FramedRepT {
  std::vector<Mat<S>> V;
  std::vector<Mat<S>> e;
};

template <class S>
struct GaugeElementT {
  std::vector<Mat<S>> g;
  bool unitary = false;  // informational
};

// Chart coordinates: W[a] as V[a]; b[i] holds the framing columns beyond the
// square block, d_i x (n_i - d_i). Its first column is the bias.
template <class S>
struct ChartPointT {
  std::vector<Mat<S>> W;
  std::vector<Mat<S>> b;
};

using FramedRep = FramedRepT<double>;
using GaugeElement = GaugeElementT<double>;
using ChartPoint = ChartPointT<double>;
using ComplexFramedRep = FramedRepT<Complex>;
using ComplexGaugeElement = GaugeElementT<Complex>;

inline constexpr double kInvertibilityTol = 1e-10;

template <class S>
void check_shapes(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r);

template <class S>
FramedRepT<S> zero_rep(const Quiver& q, const DimVectors& dims);

template <class S>
FramedRepT<S> random_rep(const Quiver& q, const DimVectors& dims, Rng& rng, double scale = 1.0);

// Rejection sampling; throws NotStable if no stable draw within max_tries.
template <class S>
FramedRepT<S> random_stable_rep(const Quiver& q, const DimVectors& dims, Rng& rng,
                                double scale = 1.0, int max_tries = 1000);

template <class S>
GaugeElementT<S> identity_gauge(const DimVectors& dims);

template <class S>
GaugeElementT<S> random_gauge(const DimVectors& dims, Rng& rng);

template <class S>
GaugeElementT<S> random_unitary_gauge(const DimVectors& dims, Rng& rng);

// V_a -> g_h V_a g_t^{-1}, e_i -> g_i e_i. Throws SingularGauge.
template <class S>
FramedRepT<S> act(const Quiver& q, const GaugeElementT<S>& g, const FramedRepT<S>& r);

// Right action on framings: e_i -> e_i u_i with u_i of size n_i x n_i.
template <class S>
FramedRepT<S> act_on_frames(const FramedRepT<S>& r, const std::vector<Mat<S>>& u);

// mu_i = e e* - sum_{t(a)=i} V_a* V_a + sum_{h(a)=i} V_a V_a*.
template <class S>
std::vector<Mat<S>> moment_map(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r);

// max_i ||mu_i - I||_max.
template <class S>
double moment_residual(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r);

struct ProjectionOptions {
  double tol = 1e-10;
  int max_iterations = 500;
};

// Moves r along its GL orbit onto mu = I. Throws NonConvergence.
template <class S>
FramedRepT<S> project_to_moment_level(const Quiver& q, const DimVectors& dims,
                                      const FramedRepT<S>& r, ProjectionOptions opts = {});

template <class S>
bool is_stable(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r);

// Requires every square framing block e_i[:, :d_i] invertible (SingularFrame).
template <class S>
ChartPointT<S> to_chart(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r);

template <class S>
FramedRepT<S> from_chart(const Quiver& q, const DimVectors& dims, const ChartPointT<S>& c);

// The gauge g with g.r == from_chart(to_chart(r)), i.e. g_i = B_i^{-1}.
template <class S>
GaugeElementT<S> chart_gauge(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r);

// Largest operator norm over the simple oriented cycles (0 when acyclic).
template <class S>
double max_cycle_norm(const Quiver& q, const FramedRepT<S>& r);

template <class S>
bool in_domain_Mcirc(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r);

// Composite V_gamma for a path (identity of size d_start for the trivial path).
template <class S>
Mat<S> path_matrix(const Quiver& q, const DimVectors& dims, const FramedRepT<S>& r, const Path& p);

// Linear-algebra helpers on rep-shaped objects.
template <class S>
FramedRepT<S> axpy(S alpha, const FramedRepT<S>& x, const FramedRepT<S>& y);  // alpha x + y
template <class S>
FramedRepT<S> scaled(S alpha, const FramedRepT<S>& x);
template <class S>
double max_abs_diff(const FramedRepT<S>& x, const FramedRepT<S>& y);

}  // namespace quivernet
