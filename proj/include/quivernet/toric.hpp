#pragma once

#include <functional>
#include <string>
#include <vector>

#include "quivernet/linalg.hpp"

namespace quivernet {

// Half-space v.x - c >= 0.
struct Facet {
  Vector v;
  double c = 0;
};

struct MomentPolytope {
  int dim = 0;
  std::vector<Facet> facets;
  std::vector<Vector> points;  // lattice points whose hull is the polytope (may be empty)
  std::string preset;          // "Pd", "Cd", "P1d" or empty

  static MomentPolytope projective(int d);  // standard simplex
  static MomentPolytope affine(int d);      // positive orthant
  static MomentPolytope product_p1(int d);  // unit cube
  static MomentPolytope from_preset(const std::string& name, int d);

  // Values of every l_j at x.
  Vector slack(const Vector& x) const;
  bool is_interior(const Vector& x) const;
};

// (1/2) sum_j v_j log l_j(x). Throws OnBoundary unless x is strictly interior.
Vector legendre_map(const MomentPolytope& p, const Vector& x);

// e^{2 r_i} / (1 + sum_j e^{2 r_j}); inverse of legendre_map on the simplex.
Vector sigma_simplex(const Vector& r);

// sum_i e^{2 u_i.r} u_i / sum_j e^{2 u_j.r}.
Vector sigma_general(const std::vector<Vector>& points, const Vector& r);

// Cube version: componentwise e^{2r}/(1+e^{2r}).
Vector sigma_product(const Vector& r);

Vector psi_disc(const Vector& z);

// v / sqrt(1 + v^T H v). Throws NotPositiveDefinite.
Vector psi_bundle(const Vector& v, const Matrix& H);

using BaseMap = std::function<Vector(const Vector&)>;

// sum_k base_k(e_1^T H v, ..., e_n^T H v) e_k.
Vector sigma_bundle(const Vector& v, const Matrix& H, const Matrix& e, const BaseMap& base);

// Self-maps of R^n used as the base of sigma_bundle.
//   identity: z
//   simplex_full: the simplex map on all n coordinates
//   simplex_framed: the simplex map on the first d coordinates, 0 on the rest
// simplex_framed with d = n - 1 makes the bundle map agree with W -> sigma(W)
// at small weights, the bias slot contributing nothing.
enum class BaseKind { Identity, SimplexFull, SimplexFramed };

struct BaseActivation {
  BaseKind kind = BaseKind::SimplexFramed;
  int framed = 0;  // d for SimplexFramed

  Vector apply(const Vector& z) const;
  Matrix jacobian(const Vector& z) const;
  BaseMap as_map() const;
};

// Jacobian of sigma_simplex: 2 s_i (delta_ik - s_k).
Matrix sigma_simplex_jacobian(const Vector& r);
// Jacobian of psi_bundle with respect to v.
Matrix psi_bundle_jacobian(const Vector& v, const Matrix& H);

// --- tropical limits -------------------------------------------------------

struct TropicalLimit {
  enum class Kind { Point, Boundary, Unsupported };
  Kind kind = Kind::Point;
  Vector point;             // p_C when kind == Point
  std::vector<int> active;  // indices of the maximizing points (or cone index)
};

// Simplicial cone spanned by `rays`, sent to `limit`.
struct ExplicitCone {
  std::vector<Vector> rays;
  Vector limit;
};

// Normal fan of a point set: the cone of x collects the u_i maximizing u_i.x
// and its limit point is their barycenter. Explicit cone lists are also
// accepted. The orthant preset is supported only on the closed negative orthant.
class Fan {
 public:
  static Fan of_points(std::vector<Vector> points);
  static Fan of_cones(int dim, std::vector<ExplicitCone> cones);
  static Fan from_polytope(const MomentPolytope& p);

  int dim() const { return dim_; }
  const std::vector<Vector>& points() const { return points_; }

  // Distances below wall_tol to a wall (without lying on it) give Boundary.
  TropicalLimit sigma_infinity(const Vector& x, double wall_tol = 1e-9) const;

 private:
  enum class Mode { Points, Cones, Orthant };
  Mode mode_ = Mode::Points;
  int dim_ = 0;
  std::vector<Vector> points_;
  std::vector<ExplicitCone> cones_;
};

// --- symplectic checks -----------------------------------------------------

enum class PullbackMap {
  PsiDisc,         // z -> z / sqrt(1+|z|^2) on C = R^2, samples are (Re z, Im z)
  SigmaCylinder,   // (r, theta) -> (sigma(r), theta), samples are (r, theta)
};

// Pulls back the target area form through a central-difference Jacobian and
// compares it with the Fubini-Study density in the source coordinates.
// Returns the largest relative residual.
double sympl_pullback_check(PullbackMap map, const std::vector<Vector>& samples, double h = 1e-5);

// Difference between (1/2) log((e^x - 1)/x) and its power series near 0.
double softplus_potential_check(double x);
double softplus_potential(double x);         // closed form, continuous at 0
double softplus_potential_series(double x);
double softplus(double y);                   // log(1 + e^{2y})
double softplus_inverse(double x);           // (1/2) log(e^x - 1)
double softplus_inverse_derivative(double x);  // e^x / (2 (e^x - 1))

}  // namespace quivernet
