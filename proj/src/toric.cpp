#include "quivernet/toric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quivernet/errors.hpp"

namespace quivernet {

namespace {

Vector unit(int d, int i) {
  Vector e = Vector::Zero(d);
  e(i) = 1.0;
  return e;
}

}  // namespace

MomentPolytope MomentPolytope::projective(int d) {
  MomentPolytope p;
  p.dim = d;
  p.preset = "Pd";
  for (int i = 0; i < d; ++i) p.facets.push_back({unit(d, i), 0.0});
  p.facets.push_back({Vector::Constant(d, -1.0), -1.0});
  p.points.push_back(Vector::Zero(d));
  for (int i = 0; i < d; ++i) p.points.push_back(unit(d, i));
  return p;
}

MomentPolytope MomentPolytope::affine(int d) {
  MomentPolytope p;
  p.dim = d;
  p.preset = "Cd";
  for (int i = 0; i < d; ++i) p.facets.push_back({unit(d, i), 0.0});
  return p;
}

MomentPolytope MomentPolytope::product_p1(int d) {
  MomentPolytope p;
  p.dim = d;
  p.preset = "P1d";
  for (int i = 0; i < d; ++i) {
    p.facets.push_back({unit(d, i), 0.0});
    p.facets.push_back({-unit(d, i), -1.0});
  }
  const int corners = 1 << d;
  for (int mask = 0; mask < corners; ++mask) {
    Vector u(d);
    for (int i = 0; i < d; ++i) u(i) = (mask >> i) & 1;
    p.points.push_back(u);
  }
  return p;
}

MomentPolytope MomentPolytope::from_preset(const std::string& name, int d) {
  if (d < 1) fail(ErrorCode::InvalidInput, "polytope dimension must be positive");
  if (name == "Pd") return projective(d);
  if (name == "Cd") return affine(d);
  if (name == "P1d") return product_p1(d);
  fail(ErrorCode::InvalidInput, "unknown polytope preset '" + name + "'");
}

Vector MomentPolytope::slack(const Vector& x) const {
  if (x.size() != dim) fail(ErrorCode::ShapeMismatch, "point has wrong dimension");
  Vector l(facets.size());
  for (std::size_t j = 0; j < facets.size(); ++j) l(j) = facets[j].v.dot(x) - facets[j].c;
  return l;
}

bool MomentPolytope::is_interior(const Vector& x) const {
  Vector l = slack(x);
  return l.size() == 0 || l.minCoeff() > 0.0;
}

Vector legendre_map(const MomentPolytope& p, const Vector& x) {
  Vector l = p.slack(x);
  Vector out = Vector::Zero(p.dim);
  for (std::size_t j = 0; j < p.facets.size(); ++j) {
    if (!(l(j) > 0.0)) fail(ErrorCode::OnBoundary, "point is not interior to the polytope");
    out += 0.5 * std::log(l(j)) * p.facets[j].v;
  }
  return out;
}

Vector sigma_simplex(const Vector& r) {
  const double shift = std::max(0.0, r.size() ? 2.0 * r.maxCoeff() : 0.0);
  Vector w = (2.0 * r.array() - shift).exp().matrix();
  return w / (std::exp(-shift) + w.sum());
}

Vector sigma_general(const std::vector<Vector>& points, const Vector& r) {
  if (points.empty()) fail(ErrorCode::InvalidInput, "sigma_general needs at least one point");
  Vector score(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) score(i) = 2.0 * points[i].dot(r);
  const double shift = score.maxCoeff();
  Vector out = Vector::Zero(points[0].size());
  double total = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double w = std::exp(score(i) - shift);
    out += w * points[i];
    total += w;
  }
  return out / total;
}

Vector sigma_product(const Vector& r) {
  Vector out(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) out(i) = sigma_simplex(r.segment(i, 1))(0);
  return out;
}

Vector psi_disc(const Vector& z) { return z / std::sqrt(1.0 + z.squaredNorm()); }

Vector psi_bundle(const Vector& v, const Matrix& H) {
  if (H.rows() != v.size() || H.cols() != v.size()) fail(ErrorCode::ShapeMismatch, "psi_bundle: H does not match v");
  Eigen::LLT<Matrix> llt(hermitian_part(H));
  if (llt.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "psi_bundle: metric is not positive definite");
  return v / std::sqrt(1.0 + v.dot(H * v));
}

Vector sigma_bundle(const Vector& v, const Matrix& H, const Matrix& e, const BaseMap& base) {
  if (H.rows() != v.size() || e.rows() != v.size()) fail(ErrorCode::ShapeMismatch, "sigma_bundle: shapes do not match");
  Vector z = e.transpose() * (H * v);
  Vector s = base(z);
  if (s.size() != e.cols()) fail(ErrorCode::ShapeMismatch, "sigma_bundle: base map changed the dimension");
  return e * s;
}

Matrix sigma_simplex_jacobian(const Vector& r) {
  Vector s = sigma_simplex(r);
  Matrix J = -2.0 * s * s.transpose();
  J.diagonal() += 2.0 * s;
  return J;
}

Matrix psi_bundle_jacobian(const Vector& v, const Matrix& H) {
  const double s = std::sqrt(1.0 + v.dot(H * v));
  Matrix J = Matrix::Identity(v.size(), v.size()) / s;
  J -= v * (H * v).transpose() / (s * s * s);
  return J;
}

Vector BaseActivation::apply(const Vector& z) const {
  switch (kind) {
    case BaseKind::Identity:
      return z;
    case BaseKind::SimplexFull:
      return sigma_simplex(z);
    case BaseKind::SimplexFramed: {
      Vector out = Vector::Zero(z.size());
      const int d = std::min<int>(framed, z.size());
      out.head(d) = sigma_simplex(z.head(d));
      return out;
    }
  }
  return z;
}

Matrix BaseActivation::jacobian(const Vector& z) const {
  switch (kind) {
    case BaseKind::Identity:
      return Matrix::Identity(z.size(), z.size());
    case BaseKind::SimplexFull:
      return sigma_simplex_jacobian(z);
    case BaseKind::SimplexFramed: {
      Matrix J = Matrix::Zero(z.size(), z.size());
      const int d = std::min<int>(framed, z.size());
      J.topLeftCorner(d, d) = sigma_simplex_jacobian(z.head(d));
      return J;
    }
  }
  return Matrix::Identity(z.size(), z.size());
}

BaseMap BaseActivation::as_map() const {
  BaseActivation copy = *this;
  return [copy](const Vector& z) { return copy.apply(z); };
}

// ---------------------------------------------------------------------------

Fan Fan::of_points(std::vector<Vector> points) {
  if (points.empty()) fail(ErrorCode::InvalidInput, "fan needs at least one point");
  Fan f;
  f.mode_ = Mode::Points;
  f.dim_ = static_cast<int>(points[0].size());
  for (const auto& u : points)
    if (u.size() != f.dim_) fail(ErrorCode::ShapeMismatch, "fan points differ in dimension");
  f.points_ = std::move(points);
  return f;
}

Fan Fan::of_cones(int dim, std::vector<ExplicitCone> cones) {
  for (const auto& c : cones) {
    if (static_cast<int>(c.rays.size()) != dim || c.limit.size() != dim)
      fail(ErrorCode::InvalidInput, "explicit cones must be simplicial with dim rays");
    for (const auto& r : c.rays)
      if (r.size() != dim) fail(ErrorCode::ShapeMismatch, "cone ray has wrong dimension");
  }
  Fan f;
  f.mode_ = Mode::Cones;
  f.dim_ = dim;
  f.cones_ = std::move(cones);
  return f;
}

Fan Fan::from_polytope(const MomentPolytope& p) {
  if (p.preset == "Cd") {
    Fan f;
    f.mode_ = Mode::Orthant;
    f.dim_ = p.dim;
    return f;
  }
  if (p.points.empty()) fail(ErrorCode::InvalidInput, "polytope carries no lattice points for its fan");
  return of_points(p.points);
}

TropicalLimit Fan::sigma_infinity(const Vector& x, double wall_tol) const {
  if (x.size() != dim_) fail(ErrorCode::ShapeMismatch, "point has wrong dimension");
  TropicalLimit out;
  const double eps = std::numeric_limits<double>::epsilon();

  if (mode_ == Mode::Orthant) {
    out.point = Vector::Zero(dim_);
    for (int i = 0; i < dim_; ++i) {
      if (x(i) == 0.0) {
        out.point(i) = 1.0;
        out.active.push_back(i);
      } else if (std::abs(x(i)) <= wall_tol) {
        out.kind = TropicalLimit::Kind::Boundary;
      } else if (x(i) > 0.0) {
        out.kind = TropicalLimit::Kind::Unsupported;
        return out;
      }
    }
    return out;
  }

  if (mode_ == Mode::Cones) {
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      Matrix R(dim_, dim_);
      for (int j = 0; j < dim_; ++j) R.col(j) = cones_[k].rays[j];
      Matrix Rinv = R.inverse();
      Vector lambda = Rinv * x;
      bool inside = true, near = false;
      for (int j = 0; j < dim_; ++j) {
        double dist = lambda(j) / Rinv.row(j).norm();
        if (dist < -wall_tol) inside = false;
        else if (dist <= wall_tol) near = true;
      }
      if (!inside) continue;
      if (near) {
        out.kind = TropicalLimit::Kind::Boundary;
        return out;
      }
      out.point = cones_[k].limit;
      out.active = {static_cast<int>(k)};
      return out;
    }
    out.kind = TropicalLimit::Kind::Unsupported;
    return out;
  }

  Vector score(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) score(i) = points_[i].dot(x);
  Eigen::Index best;
  const double top = score.maxCoeff(&best);
  const double scale = std::max(1.0, score.cwiseAbs().maxCoeff());
  out.point = Vector::Zero(dim_);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double gap = top - score(i);
    if (gap <= 4 * eps * scale) {
      out.active.push_back(static_cast<int>(i));
      out.point += points_[i];
      continue;
    }
    const double sep = (points_[i] - points_[best]).norm();
    if (sep > 0 && gap / sep <= wall_tol) {
      out.kind = TropicalLimit::Kind::Boundary;
      out.active.clear();
      out.point = Vector();
      return out;
    }
  }
  out.point /= static_cast<double>(out.active.size());
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Vector pullback_map(PullbackMap map, const Vector& p) {
  if (map == PullbackMap::PsiDisc) return psi_disc(p);
  Vector out(2);
  out(0) = sigma_simplex(p.head(1))(0);
  out(1) = p(1);
  return out;
}

// Fubini-Study area density in the sample coordinates, normalized so that
// both maps are symplectic for the standard form on the target.
double fubini_study_density(PullbackMap map, const Vector& p) {
  if (map == PullbackMap::PsiDisc) {
    const double w = 1.0 + p.squaredNorm();
    return 1.0 / (w * w);
  }
  const double x = std::exp(2.0 * p(0));
  return 2.0 * x / ((1.0 + x) * (1.0 + x));
}

}  // namespace

double sympl_pullback_check(PullbackMap map, const std::vector<Vector>& samples, double h) {
  double worst = 0;
  for (const auto& p : samples) {
    if (p.size() != 2) fail(ErrorCode::ShapeMismatch, "pullback samples are 2-vectors");
    Matrix J(2, 2);
    for (int k = 0; k < 2; ++k) {
      Vector step = Vector::Zero(2);
      step(k) = h;
      J.col(k) = (pullback_map(map, p + step) - pullback_map(map, p - step)) / (2 * h);
    }
    const double ref = fubini_study_density(map, p);
    worst = std::max(worst, std::abs(std::abs(J.determinant()) - ref) / ref);
  }
  return worst;
}

double softplus_potential(double x) {
  if (x < 0) fail(ErrorCode::InvalidInput, "softplus potential needs x >= 0");
  if (x == 0) return 0.0;
  return 0.5 * std::log(std::expm1(x) / x);
}

double softplus_potential_series(double x) {
  double term = x / 2.0, sum = 0;
  for (int k = 1; k < 2000 && term > 1e-18 * (1.0 + sum); ++k) {
    sum += term;
    term *= x / (k + 2);
  }
  return 0.5 * std::log1p(sum);
}

double softplus_potential_check(double x) {
  if (!(x > 0)) fail(ErrorCode::InvalidInput, "softplus check needs x > 0");
  return std::abs(softplus_potential(x) - softplus_potential_series(x));
}

double softplus(double y) {
  const double t = 2.0 * y;
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double softplus_inverse(double x) {
  if (!(x > 0)) fail(ErrorCode::InvalidInput, "softplus inverse needs x > 0");
  return x > 1 ? 0.5 * (x + std::log(-std::expm1(-x))) : 0.5 * std::log(std::expm1(x));
}

double softplus_inverse_derivative(double x) {
  if (!(x > 0)) fail(ErrorCode::InvalidInput, "softplus inverse needs x > 0");
  return 0.5 / -std::expm1(-x);
}

}  // namespace quivernet
