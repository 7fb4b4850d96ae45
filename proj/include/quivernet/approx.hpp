#pragma once

#include <functional>
#include <vector>

#include "quivernet/linalg.hpp"

namespace quivernet {

// --- centered simplicial webs (n = 1, 2) -------------------------------------

// Hyperplane normal . x = offset.
struct Cut {
  Vector normal;
  double offset = 0;
};

// One inductive step: cut the non-compact chamber in slot `slot` and move the
// center by -t times the direction of that slot's opposite outer ray.
struct WebStep {
  int slot = 0;
  Cut cut;
  double t = 0;
};

// Starting fan: center plus n+1 ray directions, ray i opposite slot i. Empty
// rays give the standard fan of P^n (rays (1,..,1) and -e_i).
struct WebSpec {
  int n = 1;
  Vector center;
  std::vector<Vector> rays;
  std::vector<WebStep> steps;
};

struct OuterRay {
  Vector base;
  Vector dir;  // unit length
};

struct WebChamber {
  bool compact = false;
  // Boundary chain as vertex indices. Compact: closed polygon (n = 2) or the
  // two endpoints (n = 1). Non-compact: from the front ray's base to the back's.
  std::vector<int> vertices;
  // Outer rays at the chain's front and back (non-compact only; n = 1 uses
  // front_ray alone).
  int front_ray = -1;
  int back_ray = -1;
};

class CenteredWeb {
 public:
  int n = 1;
  WebSpec spec;
  // Chamber k is the region where the k-th lifted affine function wins:
  // 0..n from the starting fan, n+1+s added by step s.
  std::vector<WebChamber> chambers;
  std::vector<int> slots;          // non-compact chamber in each slot
  std::vector<OuterRay> rays;      // ray i is opposite slot i
  std::vector<Vector> centers;     // c_0 .. c_N
  std::vector<Vector> vertices;
  std::vector<std::pair<int, int>> segments;  // vertex index pairs (n = 2)
  std::vector<int> compact_order;  // chamber indices in the order they closed
  std::vector<Cut> cuts;           // step cuts, normal pointing to the far side

  int compact_count() const { return static_cast<int>(compact_order.size()); }
  int chamber_count() const { return static_cast<int>(chambers.size()); }

  // Chamber containing x, or -1 when x is within `margin` of the 1-skeleton.
  int locate(const Vector& x, double margin = 0) const;
  // Distance from x to the union of walls.
  double wall_distance(const Vector& x) const;
  // Number of edges (segments and rays) at each vertex.
  std::vector<int> valence() const;
};

// Throws CenterOutsideChambers, NonTransverseCut, InvalidInput.
CenteredWeb build_web(const WebSpec& spec);

// Web in R with chambers (-inf, lo+h), [lo+h, lo+2h], ..., (hi-h, inf) for
// h = (hi - lo) / chambers; centers at compact chamber midpoints.
WebSpec uniform_web_1d(double lo, double hi, int chambers);

// --- lifting to the fan of P^d ------------------------------------------------

struct AffineEmbedding {
  Matrix A;  // d x n
  Vector offset;
  Vector operator()(const Vector& x) const { return A * x + offset; }
};

// L with d = n + N such that argmax(0, L(x)) is the chamber index of x.
// Throws LiftFailure naming the first inductive step that does not lift.
AffineEmbedding lift_web(const CenteredWeb& web);

// Index of the maximal cone S_i of the P^d fan containing y (0 for the
// cone where every coordinate is negative).
int fan_cone(const Vector& y);

struct LiftCheck {
  std::size_t tested = 0;     // grid points outside the wall margin
  std::size_t consistent = 0;
  double fraction() const { return tested ? static_cast<double>(consistent) / tested : 1.0; }
};

// Compares fan_cone(L(x)) with web.locate(x) on a grid over the box
// [lo, hi], skipping points within `margin` of a wall.
LiftCheck check_lift(const CenteredWeb& web, const AffineEmbedding& L, const Vector& lo, const Vector& hi,
                     int per_axis, double margin);

// Box around every vertex and center, padded by half its size (at least 1).
void web_bounding_box(const CenteredWeb& web, Vector& lo, Vector& hi);

// --- polytopes into simplices --------------------------------------------------

// { x : A x <= b }
struct HPolytope {
  Matrix A;
  Vector b;
};

struct SimplexEmbedding {
  AffineEmbedding L;  // R^n -> R^{m-1}
  Matrix facets;      // m x (m-1): the simplex is { z : facets z <= 1 }
};

// Throws OriginNotInterior (some b_i <= 0) and InvalidInput (unbounded).
SimplexEmbedding polytope_to_simplex(const HPolytope& p);

// Largest violation of "x in P iff L(x) in S" over the samples, measured as
// |max_j (A x - b)_j / b_j - max_k (facets L(x) - 1)_k|.
double simplex_embedding_residual(const HPolytope& p, const SimplexEmbedding& e, const std::vector<Vector>& samples);

// --- step functions and the constructive approximation ------------------------

using TargetFn = std::function<Vector(const Vector&)>;

struct StepFit {
  std::vector<Vector> value;       // r_C per chamber
  std::vector<double> deviation;   // sup |f - r_C| over the chamber's samples
  std::vector<int> samples;        // 0 when the chamber misses K
};

// Chamber means over quasi-random samples in C ∩ K (K the box [lo, hi]).
StepFit step_function_fit(const TargetFn& f, const Vector& lo, const Vector& hi, const CenteredWeb& web,
                          int samples_per_chamber = 256);

struct L2Quadrature {
  int per_axis_1d = 20000;
  int per_axis_2d = 400;
};

// ||f - s||_{L2(K)} by the midpoint rule.
double step_l2_error(const TargetFn& f, const Vector& lo, const Vector& hi, const CenteredWeb& web, const StepFit& fit,
                     const L2Quadrature& quad = {});

struct UatOptions {
  double wall_band = 0;  // width of the wall neighbourhood U; 0: 1e-3 of diam K
  int samples_per_chamber = 256;
  L2Quadrature quad;
};

struct UatResult {
  Matrix W1;
  Vector b;
  Matrix W2;        // d_out x d
  Vector W2_offset; // r_0
  double t = 0;
  double l2_error = 0;     // ||W2 sigma(t L) + r_0 - f||
  double f_norm = 0;       // ||f||
  double step_error = 0;   // ||s - f||
  double tail_error = 0;   // ||W2 sigma(t L) - s|| on K \ U
  double wall_error = 0;   // the same on K ∩ U
  double wall_volume = 0;  // Vol(K ∩ U)
  double interpolation_residual = 0;  // max_i |W2(eps_i) - r_i|
};

UatResult constructive_uat(const TargetFn& f, const Vector& lo, const Vector& hi, const CenteredWeb& web, double t,
                           const UatOptions& opts = {});

// One run per t, computed in parallel, returned in the order of ts.
std::vector<UatResult> uat_sweep(const TargetFn& f, const Vector& lo, const Vector& hi, const CenteredWeb& web,
                                 const std::vector<double>& ts, const UatOptions& opts = {});

// W2 sigma(W1 x + b) + offset.
Vector uat_network(const UatResult& net, const Vector& x);

}  // namespace quivernet
