#include "quivernet/approx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "quivernet/errors.hpp"
#include "quivernet/parallel.hpp"
#include "quivernet/toric.hpp"

namespace quivernet {

namespace {

constexpr double kFar = 1e6;  // length at which unbounded chambers are truncated

double cross2(const Vector& a, const Vector& b) { return a(0) * b(1) - a(1) * b(0); }

double segment_distance(const Vector& x, const Vector& p, const Vector& q) {
  Vector d = q - p;
  const double len2 = d.squaredNorm();
  const double s = len2 > 0 ? std::clamp((x - p).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (x - p - s * d).norm();
}

double ray_distance(const Vector& x, const OuterRay& r) {
  const double s = std::max(0.0, (x - r.base).dot(r.dir));
  return (x - r.base - s * r.dir).norm();
}

// Sign-consistent test against a closed convex polygon; boundary counts as inside
// up to `tol`.
bool in_convex_polygon(const std::vector<Vector>& poly, const Vector& x, double tol) {
  int pos = 0, neg = 0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Vector& p = poly[k];
    const Vector& q = poly[(k + 1) % poly.size()];
    Vector e = q - p;
    const double len = e.norm();
    if (len == 0) continue;
    const double c = cross2(e, x - p) / len;
    if (c > tol) ++pos;
    if (c < -tol) ++neg;
    if (pos && neg) return false;
  }
  return true;
}

// Does the ray p + s d (s > 0) meet the segment [a, b]?
bool ray_hits_segment(const Vector& p, const Vector& d, const Vector& a, const Vector& b, double tol) {
  Vector e = b - a;
  const double den = cross2(d, e);
  if (std::abs(den) < 1e-14) return false;
  const double s = cross2(a - p, e) / den;
  const double u = cross2(a - p, d) / den;
  return s > tol && u > tol && u < 1 - tol;
}

bool ray_hits_ray(const Vector& p, const Vector& d, const Vector& a, const Vector& e, double tol) {
  const double den = cross2(d, e);
  if (std::abs(den) < 1e-14) return false;
  const double s = cross2(a - p, e) / den;
  const double u = cross2(a - p, d) / den;
  return s > tol && u > tol;
}

Vector standard_ray(int n, int i) {
  if (i == 0) return Vector::Ones(n);
  Vector r = Vector::Zero(n);
  r(i - 1) = -1.0;
  return r;
}

// Affine functions (gradient rows, offsets) of the starting fan: 0 and
// A (x - c0) where A sends the rays to those of the P^n fan with |det A| = 1.
void base_functions(const WebSpec& spec, const std::vector<Vector>& dirs, Matrix& grad, Vector& offset) {
  const int n = spec.n;
  Matrix U(n, n + 1);
  for (int i = 0; i <= n; ++i) U.col(i) = dirs[i];
  Eigen::JacobiSVD<Matrix> svd(U, Eigen::ComputeFullV);
  if (svd.singularValues()(n - 1) < 1e-10) fail(ErrorCode::InvalidInput, "web rays do not span R^n");
  Vector mu = svd.matrixV().col(n);
  if (mu.sum() < 0) mu = -mu;
  if (mu.minCoeff() <= 1e-12) fail(ErrorCode::InvalidInput, "web rays do not positively span R^n");
  Matrix M(n, n);
  for (int i = 1; i <= n; ++i) M.col(i - 1) = mu(i) * dirs[i];
  M /= std::pow(std::abs(M.determinant()), 1.0 / n);
  Matrix A = -M.inverse();
  grad = Matrix::Zero(n + 1, n);
  offset = Vector::Zero(n + 1);
  grad.bottomRows(n) = A;
  offset.tail(n) = -A * spec.center;
}

}  // namespace

// --- web geometry --------------------------------------------------------------

int CenteredWeb::locate(const Vector& x, double margin) const {
  if (x.size() != n) fail(ErrorCode::ShapeMismatch, "point dimension differs from the web");
  if (margin > 0 && wall_distance(x) < margin) return -1;
  for (int c = 0; c < chamber_count(); ++c) {
    const WebChamber& ch = chambers[c];
    if (n == 1) {
      if (ch.compact) {
        const double a = vertices[ch.vertices[0]](0), b = vertices[ch.vertices[1]](0);
        if (x(0) >= std::min(a, b) && x(0) <= std::max(a, b)) return c;
      } else {
        const OuterRay& r = rays[ch.front_ray];
        if ((x(0) - r.base(0)) * r.dir(0) >= 0) return c;
      }
      continue;
    }
    std::vector<Vector> poly;
    if (!ch.compact) poly.push_back(rays[ch.front_ray].base + kFar * rays[ch.front_ray].dir);
    for (int v : ch.vertices) poly.push_back(vertices[v]);
    if (!ch.compact) poly.push_back(rays[ch.back_ray].base + kFar * rays[ch.back_ray].dir);
    if (in_convex_polygon(poly, x, 0.0)) return c;
  }
  return -1;
}

double CenteredWeb::wall_distance(const Vector& x) const {
  double best = std::numeric_limits<double>::infinity();
  if (n == 1) {
    for (const Vector& v : vertices) best = std::min(best, std::abs(x(0) - v(0)));
    return best;
  }
  for (const auto& [a, b] : segments) best = std::min(best, segment_distance(x, vertices[a], vertices[b]));
  for (const OuterRay& r : rays) best = std::min(best, ray_distance(x, r));
  return best;
}

std::vector<int> CenteredWeb::valence() const {
  std::vector<int> count(vertices.size(), 0);
  if (n == 1) {
    // every wall point separates two chambers
    for (int& c : count) c = 2;
    return count;
  }
  for (const auto& [a, b] : segments) {
    ++count[a];
    ++count[b];
  }
  for (const OuterRay& r : rays)
    for (std::size_t v = 0; v < vertices.size(); ++v)
      if ((vertices[v] - r.base).norm() == 0) ++count[v];
  return count;
}

namespace {

int add_vertex(CenteredWeb& w, const Vector& p) {
  w.vertices.push_back(p);
  return static_cast<int>(w.vertices.size()) - 1;
}

double web_scale(const CenteredWeb& w) {
  double s = 1.0;
  for (const Vector& v : w.vertices) s = std::max(s, v.cwiseAbs().maxCoeff());
  return s;
}

bool in_compact_union(const CenteredWeb& w, const Vector& x, double tol) {
  for (int c : w.compact_order) {
    const WebChamber& ch = w.chambers[c];
    if (w.n == 1) {
      const double a = w.vertices[ch.vertices[0]](0), b = w.vertices[ch.vertices[1]](0);
      if (x(0) >= std::min(a, b) - tol && x(0) <= std::max(a, b) + tol) return true;
      continue;
    }
    std::vector<Vector> poly;
    for (int v : ch.vertices) poly.push_back(w.vertices[v]);
    if (in_convex_polygon(poly, x, tol)) return true;
  }
  return false;
}

void step_1d(CenteredWeb& w, const WebStep& st, int index) {
  const int fx = w.slots[st.slot];
  WebChamber& ch = w.chambers[fx];
  const int r = ch.front_ray;
  const Vector u = w.rays[r].dir;
  const Vector p = w.rays[r].base;
  if (std::abs(st.cut.normal(0)) < 1e-14) fail(ErrorCode::NonTransverseCut, "step " + std::to_string(index) + ": degenerate cut");
  const double q = st.cut.offset / st.cut.normal(0);
  const double tol = 1e-12 * web_scale(w);
  if ((q - p(0)) * u(0) <= tol)
    fail(ErrorCode::NonTransverseCut, "step " + std::to_string(index) + ": cut misses the chamber's outer ray");
  Cut oriented{Vector::Constant(1, u(0)), u(0) * q};
  const int iq = add_vertex(w, Vector::Constant(1, q));
  ch.compact = true;
  ch.vertices = {ch.vertices.front(), iq};
  ch.front_ray = -1;
  w.compact_order.push_back(fx);

  const Vector c = w.centers.back() - st.t * w.rays[st.slot].dir;
  if (!in_compact_union(w, c, tol))
    fail(ErrorCode::CenterOutsideChambers, "step " + std::to_string(index) + ": new center leaves the compact chambers");

  WebChamber far;
  far.vertices = {iq};
  far.front_ray = r;
  w.rays[r] = OuterRay{Vector::Constant(1, q), u};
  w.chambers.push_back(far);
  w.slots[st.slot] = w.chamber_count() - 1;
  w.centers.push_back(c);
  w.cuts.push_back(oriented);
}

void step_2d(CenteredWeb& w, const WebStep& st, int index) {
  const std::string where = "step " + std::to_string(index) + ": ";
  const int fx = w.slots[st.slot];
  const WebChamber old = w.chambers[fx];
  const int ra = old.front_ray, rb = old.back_ray;
  const OuterRay a = w.rays[ra], b = w.rays[rb];
  Vector normal = st.cut.normal;
  double offset = st.cut.offset;
  const double na = normal.dot(a.dir), nb = normal.dot(b.dir);
  if (std::abs(na) < 1e-14 || std::abs(nb) < 1e-14 || (na > 0) != (nb > 0))
    fail(ErrorCode::NonTransverseCut, where + "cut does not close off the chamber");
  if (na < 0) {
    normal = -normal;
    offset = -offset;
  }
  const double tol = 1e-12 * web_scale(w);
  const double sa = (offset - normal.dot(a.base)) / normal.dot(a.dir);
  const double sb = (offset - normal.dot(b.base)) / normal.dot(b.dir);
  if (sa <= tol || sb <= tol) fail(ErrorCode::NonTransverseCut, where + "cut misses the interior of an adjacent ray");
  for (int v : old.vertices)
    if (normal.dot(w.vertices[v]) - offset >= -tol)
      fail(ErrorCode::NonTransverseCut, where + "cut crosses the chamber's bounded boundary");

  const Vector va = a.base + sa * a.dir, vb = b.base + sb * b.dir;
  const Vector c = w.centers.back() - st.t * w.rays[st.slot].dir;
  const Vector da = (va - c).normalized(), db = (vb - c).normalized();
  if ((va - c).norm() <= tol || (vb - c).norm() <= tol)
    fail(ErrorCode::CenterOutsideChambers, where + "new center sits on a new vertex");

  // the new rays may not cross the existing 1-skeleton
  const int front = old.vertices.front(), back = old.vertices.back();
  std::vector<std::pair<Vector, Vector>> segs;
  for (const auto& [p, q] : w.segments) segs.emplace_back(w.vertices[p], w.vertices[q]);
  segs.emplace_back(w.vertices[front], va);
  segs.emplace_back(w.vertices[back], vb);
  for (const auto& [p, q] : segs) {
    if (ray_hits_segment(va, da, p, q, tol) || ray_hits_segment(vb, db, p, q, tol))
      fail(ErrorCode::InvalidInput, where + "a new outer ray crosses the web");
  }
  for (std::size_t r = 0; r < w.rays.size(); ++r) {
    if (static_cast<int>(r) == ra || static_cast<int>(r) == rb) continue;
    if (ray_hits_ray(va, da, w.rays[r].base, w.rays[r].dir, tol) || ray_hits_ray(vb, db, w.rays[r].base, w.rays[r].dir, tol))
      fail(ErrorCode::InvalidInput, where + "a new outer ray crosses the web");
  }
  if (ray_hits_ray(va, da, vb, db, tol)) fail(ErrorCode::InvalidInput, where + "the new outer rays cross");

  const int ia = add_vertex(w, va), ib = add_vertex(w, vb);
  WebChamber& ch = w.chambers[fx];
  ch.compact = true;
  ch.vertices.insert(ch.vertices.begin(), ia);
  ch.vertices.push_back(ib);
  ch.front_ray = ch.back_ray = -1;
  w.compact_order.push_back(fx);
  if (!in_compact_union(w, c, tol))
    fail(ErrorCode::CenterOutsideChambers, where + "new center leaves the compact chambers");

  w.segments.emplace_back(front, ia);
  w.segments.emplace_back(back, ib);
  w.segments.emplace_back(ia, ib);

  // neighbours across the old rays pick up the new vertices
  auto extend = [&](int slot, int ray, int vertex) {
    WebChamber& nb = w.chambers[w.slots[slot]];
    if (nb.front_ray == ray)
      nb.vertices.insert(nb.vertices.begin(), vertex);
    else
      nb.vertices.push_back(vertex);
  };
  extend(rb, ra, ia);
  extend(ra, rb, ib);
  w.rays[ra] = OuterRay{va, da};
  w.rays[rb] = OuterRay{vb, db};

  WebChamber far;
  far.vertices = {ia, ib};
  far.front_ray = ra;
  far.back_ray = rb;
  w.chambers.push_back(far);
  w.slots[st.slot] = w.chamber_count() - 1;
  w.centers.push_back(c);
  w.cuts.push_back(Cut{normal, offset});
}

}  // namespace

CenteredWeb build_web(const WebSpec& spec) {
  const int n = spec.n;
  if (n != 1 && n != 2) fail(ErrorCode::InvalidInput, "webs are built for n = 1 or 2 only");
  if (spec.center.size() != n) fail(ErrorCode::ShapeMismatch, "web center has the wrong dimension");
  std::vector<Vector> dirs = spec.rays;
  if (dirs.empty())
    for (int i = 0; i <= n; ++i) dirs.push_back(standard_ray(n, i));
  if (static_cast<int>(dirs.size()) != n + 1) fail(ErrorCode::InvalidInput, "a web fan needs n+1 rays");
  for (Vector& d : dirs) {
    if (d.size() != n) fail(ErrorCode::ShapeMismatch, "web ray has the wrong dimension");
    if (d.norm() == 0) fail(ErrorCode::InvalidInput, "zero web ray");
    d.normalize();
  }
  Matrix grad;
  Vector off;
  base_functions(spec, dirs, grad, off);  // validates the fan

  CenteredWeb w;
  w.n = n;
  w.spec = spec;
  w.spec.rays = dirs;
  const int c0 = add_vertex(w, spec.center);
  w.centers.push_back(spec.center);
  for (int i = 0; i <= n; ++i) {
    w.rays.push_back(OuterRay{spec.center, dirs[i]});
    WebChamber ch;
    ch.vertices = {c0};
    if (n == 1) {
      ch.front_ray = 1 - i;
    } else {
      ch.front_ray = (i + 1) % 3;
      ch.back_ray = (i + 2) % 3;
    }
    w.chambers.push_back(ch);
    w.slots.push_back(i);
  }
  for (std::size_t k = 0; k < spec.steps.size(); ++k) {
    const WebStep& st = spec.steps[k];
    if (st.slot < 0 || st.slot > n) fail(ErrorCode::InvalidInput, "web step names a missing slot");
    if (st.cut.normal.size() != n) fail(ErrorCode::ShapeMismatch, "cut normal has the wrong dimension");
    if (!(st.t > 0)) fail(ErrorCode::InvalidInput, "web step needs t > 0");
    if (n == 1)
      step_1d(w, st, static_cast<int>(k) + 1);
    else
      step_2d(w, st, static_cast<int>(k) + 1);
  }
  for (int v : w.valence())
    if (v != n + 1) fail(ErrorCode::InvalidInput, "web vertex is not (n+1)-valent");
  if (n == 2)
    for (const OuterRay& r : w.rays) {
      Vector off = w.centers.back() - r.base;
      if (std::abs(cross2(r.dir, off)) > 1e-9 * web_scale(w))
        fail(ErrorCode::InvalidInput, "outer ray lines miss the current center");
    }
  return w;
}

WebSpec uniform_web_1d(double lo, double hi, int chambers) {
  if (chambers < 2 || !(hi > lo)) fail(ErrorCode::InvalidInput, "uniform web needs at least two chambers on lo < hi");
  const double h = (hi - lo) / chambers;
  WebSpec s;
  s.n = 1;
  s.center = Vector::Constant(1, lo + h);
  double c = lo + h;
  for (int k = 2; k < chambers; ++k) {
    const double wall = lo + k * h;
    const double mid = wall - h / 2;
    s.steps.push_back(WebStep{1, Cut{Vector::Ones(1), wall}, mid - c});
    c = mid;
  }
  return s;
}

// --- lifting ---------------------------------------------------------------------

int fan_cone(const Vector& y) {
  int best = 0;
  double top = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) > top) {
      top = y(i);
      best = static_cast<int>(i) + 1;
    }
  return best;
}

void web_bounding_box(const CenteredWeb& web, Vector& lo, Vector& hi) {
  lo = web.centers.front();
  hi = lo;
  for (const Vector& v : web.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  for (const Vector& c : web.centers) {
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  Vector pad = ((hi - lo) / 2).cwiseMax(1.0);
  lo -= pad;
  hi += pad;
}

LiftCheck check_lift(const CenteredWeb& web, const AffineEmbedding& L, const Vector& lo, const Vector& hi, int per_axis,
                     double margin) {
  LiftCheck out;
  const int n = web.n;
  auto visit = [&](const Vector& x) {
    const int c = web.locate(x, margin);
    if (c < 0) return;
    ++out.tested;
    if (fan_cone(L(x)) == c) ++out.consistent;
  };
  Vector x(n);
  if (n == 1) {
    for (int i = 0; i < per_axis; ++i) {
      x(0) = lo(0) + (i + 0.5) * (hi(0) - lo(0)) / per_axis;
      visit(x);
    }
  } else {
    for (int i = 0; i < per_axis; ++i)
      for (int j = 0; j < per_axis; ++j) {
        x(0) = lo(0) + (i + 0.5) * (hi(0) - lo(0)) / per_axis;
        x(1) = lo(1) + (j + 0.5) * (hi(1) - lo(1)) / per_axis;
        visit(x);
      }
  }
  return out;
}

namespace {

// Max-diagram functions; each step adds l_X + lambda h for the far side.
AffineEmbedding lift_functions(const CenteredWeb& web) {
  const int n = web.n;
  Matrix grad;
  Vector off;
  base_functions(web.spec, web.spec.rays, grad, off);
  const int total = n + 1 + static_cast<int>(web.cuts.size());
  grad.conservativeResize(total, n);
  off.conservativeResize(total);
  std::vector<int> slots(n + 1);
  for (int i = 0; i <= n; ++i) slots[i] = i;
  auto value = [&](int f, const Vector& x) { return grad.row(f).dot(x) + off(f); };
  for (std::size_t k = 0; k < web.cuts.size(); ++k) {
    const int slot = web.spec.steps[k].slot;
    const int fx = slots[slot];
    const int fy = slots[(slot + 1) % (n + 1)];
    const Vector& c = web.centers[k + 1];
    const Cut& cut = web.cuts[k];
    const double hc = cut.normal.dot(c) - cut.offset;
    const double lambda = (value(fy, c) - value(fx, c)) / hc;
    const std::string where = "step " + std::to_string(k + 1);
    if (!std::isfinite(lambda) || lambda <= 0) fail(ErrorCode::LiftFailure, where + ": no positive slope for the new chamber");
    if (n == 2) {
      const int fz = slots[(slot + 2) % 3];
      const double gap = std::abs(value(fy, c) - value(fz, c));
      if (gap > 1e-8 * (1.0 + std::abs(value(fy, c)))) fail(ErrorCode::LiftFailure, where + ": center off the opposite ray");
    }
    const int fn = n + 1 + static_cast<int>(k);
    grad.row(fn) = grad.row(fx) + lambda * cut.normal.transpose();
    off(fn) = off(fx) - lambda * cut.offset;
    slots[slot] = fn;
  }
  AffineEmbedding L;
  L.A = grad.bottomRows(total - 1).rowwise() - grad.row(0);
  L.offset = off.tail(total - 1).array() - off(0);
  return L;
}

bool lift_consistent(const CenteredWeb& web, const AffineEmbedding& L) {
  Vector lo, hi;
  web_bounding_box(web, lo, hi);
  const double margin = 1e-3 * (hi - lo).norm();
  const LiftCheck c = check_lift(web, L, lo, hi, web.n == 1 ? 10000 : 200, margin);
  return c.fraction() >= 0.999;
}

}  // namespace

AffineEmbedding lift_web(const CenteredWeb& web) {
  AffineEmbedding L = lift_functions(web);
  if (lift_consistent(web, L)) return L;
  for (std::size_t k = 1; k <= web.spec.steps.size(); ++k) {
    WebSpec partial = web.spec;
    partial.steps.resize(k);
    CenteredWeb w = build_web(partial);
    if (!lift_consistent(w, lift_functions(w)))
      fail(ErrorCode::LiftFailure, "step " + std::to_string(k) + ": lifted cones disagree with the chambers");
  }
  fail(ErrorCode::LiftFailure, "step 0: lifted cones disagree with the chambers");
}

// --- polytopes -------------------------------------------------------------------

SimplexEmbedding polytope_to_simplex(const HPolytope& p) {
  const Eigen::Index m = p.A.rows(), n = p.A.cols();
  if (p.b.size() != m) fail(ErrorCode::ShapeMismatch, "polytope A and b disagree");
  if (m < n + 1) fail(ErrorCode::InvalidInput, "a bounded polytope needs at least n+1 facets");
  for (Eigen::Index j = 0; j < m; ++j)
    if (!(p.b(j) > 0)) fail(ErrorCode::OriginNotInterior, "facet " + std::to_string(j) + " does not have the origin strictly inside");
  // vertices of the dual polytope
  Matrix N = p.A.array().colwise() / p.b.array();
  Eigen::ColPivHouseholderQR<Matrix> qr(N);
  if (qr.rank() < n) fail(ErrorCode::InvalidInput, "polytope is unbounded");
  // positive weights with sum mu_j N_j = 0, by alternating projections
  const Matrix Q = qr.householderQ() * Matrix::Identity(m, n);
  auto project = [&](const Vector& v) -> Vector { return v - Q * (Q.transpose() * v); };
  Vector mu = Vector::Ones(m);
  for (int it = 0; it < 100000; ++it) {
    Vector proj = project(mu);
    if (proj.minCoeff() >= 0.5) {
      mu = proj;
      break;
    }
    mu = proj.cwiseMax(1.0);
  }
  mu = project(mu);
  if (mu.minCoeff() <= 0) fail(ErrorCode::InvalidInput, "polytope is unbounded");
  // orthonormal basis of the hyperplane mu . y = 0
  Eigen::HouseholderQR<Matrix> hq(mu);
  Matrix full = hq.householderQ() * Matrix::Identity(m, m);
  Matrix B = full.rightCols(m - 1);
  SimplexEmbedding out;
  out.L.A = B.transpose() * N;
  out.L.offset = Vector::Zero(m - 1);
  out.facets = B;
  return out;
}

double simplex_embedding_residual(const HPolytope& p, const SimplexEmbedding& e, const std::vector<Vector>& samples) {
  double worst = 0;
  for (const Vector& x : samples) {
    const double in_p = ((p.A * x - p.b).array() / p.b.array()).maxCoeff();
    const double in_s = (e.facets * e.L(x)).array().maxCoeff() - 1.0;
    worst = std::max(worst, std::abs(in_p - in_s));
  }
  return worst;
}

// --- step functions ----------------------------------------------------------------

namespace {

double radical_inverse(std::uint64_t k, int base) {
  double inv = 1.0 / base, f = inv, r = 0;
  while (k > 0) {
    r += f * static_cast<double>(k % base);
    k /= base;
    f *= inv;
  }
  return r;
}

template <class Visit>
void midpoint_grid(const Vector& lo, const Vector& hi, const L2Quadrature& quad, Visit&& visit) {
  const int n = static_cast<int>(lo.size());
  if (n == 1) {
    const int k = quad.per_axis_1d;
    const double w = (hi(0) - lo(0)) / k;
    Vector x(1);
    for (int i = 0; i < k; ++i) {
      x(0) = lo(0) + (i + 0.5) * w;
      visit(x, w);
    }
    return;
  }
  const int k = quad.per_axis_2d;
  const double hx = (hi(0) - lo(0)) / k, hy = (hi(1) - lo(1)) / k;
  Vector x(2);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      x(0) = lo(0) + (i + 0.5) * hx;
      x(1) = lo(1) + (j + 0.5) * hy;
      visit(x, hx * hy);
    }
}

void check_box(const CenteredWeb& web, const Vector& lo, const Vector& hi) {
  if (lo.size() != web.n || hi.size() != web.n) fail(ErrorCode::ShapeMismatch, "box dimension differs from the web");
  if (!((hi - lo).minCoeff() > 0)) fail(ErrorCode::InvalidInput, "empty box");
}

}  // namespace

StepFit step_function_fit(const TargetFn& f, const Vector& lo, const Vector& hi, const CenteredWeb& web,
                          int samples_per_chamber) {
  check_box(web, lo, hi);
  if (samples_per_chamber < 1) fail(ErrorCode::InvalidInput, "need at least one sample per chamber");
  const int C = web.chamber_count();
  StepFit fit;
  fit.value.resize(C);
  fit.deviation.assign(C, 0.0);
  fit.samples.assign(C, 0);
  std::vector<std::vector<Vector>> values(C);
  for (int c = 0; c < C; ++c) {
    const WebChamber& ch = web.chambers[c];
    std::vector<Vector> pts;
    if (web.n == 1) {
      double a, b;
      if (ch.compact) {
        a = std::min(web.vertices[ch.vertices[0]](0), web.vertices[ch.vertices[1]](0));
        b = std::max(web.vertices[ch.vertices[0]](0), web.vertices[ch.vertices[1]](0));
      } else {
        const OuterRay& r = web.rays[ch.front_ray];
        a = r.dir(0) > 0 ? r.base(0) : -std::numeric_limits<double>::infinity();
        b = r.dir(0) > 0 ? std::numeric_limits<double>::infinity() : r.base(0);
      }
      a = std::max(a, lo(0));
      b = std::min(b, hi(0));
      if (b > a)
        for (int k = 0; k < samples_per_chamber; ++k)
          pts.push_back(Vector::Constant(1, a + radical_inverse(k, 2) * (b - a) + 0.5 * (b - a) / samples_per_chamber));
    } else {
      Vector blo = lo, bhi = hi;
      if (ch.compact) {
        Vector plo = web.vertices[ch.vertices[0]], phi = plo;
        for (int v : ch.vertices) {
          plo = plo.cwiseMin(web.vertices[v]);
          phi = phi.cwiseMax(web.vertices[v]);
        }
        blo = blo.cwiseMax(plo);
        bhi = bhi.cwiseMin(phi);
      }
      if ((bhi - blo).minCoeff() > 0) {
        const std::uint64_t budget = 4096ull * samples_per_chamber;
        for (std::uint64_t k = 1; k <= budget && static_cast<int>(pts.size()) < samples_per_chamber; ++k) {
          Vector x(2);
          x(0) = blo(0) + radical_inverse(k, 2) * (bhi(0) - blo(0));
          x(1) = blo(1) + radical_inverse(k, 3) * (bhi(1) - blo(1));
          if (web.locate(x) == c) pts.push_back(x);
        }
      }
    }
    for (const Vector& x : pts) values[c].push_back(f(x));
    fit.samples[c] = static_cast<int>(pts.size());
  }
  // chambers missing K take the mean over all samples
  Vector overall;
  int total = 0;
  for (const auto& vs : values)
    for (const Vector& v : vs) {
      overall = total == 0 ? v : Vector(overall + v);
      ++total;
    }
  if (total == 0) fail(ErrorCode::InvalidInput, "no chamber meets the box");
  overall /= total;
  for (int c = 0; c < C; ++c) {
    if (values[c].empty()) {
      fit.value[c] = overall;
      continue;
    }
    Vector mean = Vector::Zero(overall.size());
    for (const Vector& v : values[c]) mean += v;
    mean /= static_cast<double>(values[c].size());
    fit.value[c] = mean;
    for (const Vector& v : values[c]) fit.deviation[c] = std::max(fit.deviation[c], (v - mean).cwiseAbs().maxCoeff());
  }
  return fit;
}

double step_l2_error(const TargetFn& f, const Vector& lo, const Vector& hi, const CenteredWeb& web, const StepFit& fit,
                     const L2Quadrature& quad) {
  check_box(web, lo, hi);
  double sum = 0;
  midpoint_grid(lo, hi, quad, [&](const Vector& x, double w) {
    const int c = web.locate(x);
    sum += w * (f(x) - fit.value[c < 0 ? 0 : c]).squaredNorm();
  });
  return std::sqrt(sum);
}

std::vector<UatResult> uat_sweep(const TargetFn& f, const Vector& lo, const Vector& hi, const CenteredWeb& web,
                                 const std::vector<double>& ts, const UatOptions& opts) {
  std::vector<UatResult> out(ts.size());
  parallel_for(ts.size(), [&](std::size_t k) { out[k] = constructive_uat(f, lo, hi, web, ts[k], opts); });
  return out;
}

Vector uat_network(const UatResult& net, const Vector& x) {
  return net.W2 * sigma_simplex(net.W1 * x + net.b) + net.W2_offset;
}

UatResult constructive_uat(const TargetFn& f, const Vector& lo, const Vector& hi, const CenteredWeb& web, double t,
                           const UatOptions& opts) {
  check_box(web, lo, hi);
  if (!(t > 0)) fail(ErrorCode::InvalidInput, "t must be positive");
  const AffineEmbedding L = lift_web(web);
  const StepFit fit = step_function_fit(f, lo, hi, web, opts.samples_per_chamber);
  const Eigen::Index d = L.A.rows();
  const Vector& r0 = fit.value[0];
  UatResult out;
  out.t = t;
  out.W1 = t * L.A;
  out.b = t * L.offset;
  out.W2.resize(r0.size(), d);
  for (Eigen::Index i = 0; i < d; ++i) out.W2.col(i) = fit.value[i + 1] - r0;
  out.W2_offset = r0;
  for (Eigen::Index i = 0; i <= d; ++i) {
    Vector e = Vector::Zero(d);
    if (i > 0) e(i - 1) = 1.0;
    out.interpolation_residual =
        std::max(out.interpolation_residual, (out.W2 * e + out.W2_offset - fit.value[i]).cwiseAbs().maxCoeff());
  }

  const double band = opts.wall_band > 0 ? opts.wall_band : 1e-3 * (hi - lo).norm();
  double total = 0, fn = 0, step = 0, tail = 0, wall = 0, vol = 0;
  midpoint_grid(lo, hi, opts.quad, [&](const Vector& x, double w) {
    const Vector fx = f(x);
    const Vector net = uat_network(out, x);
    const Vector& s = fit.value[fan_cone(L(x))];
    total += w * (net - fx).squaredNorm();
    fn += w * fx.squaredNorm();
    step += w * (s - fx).squaredNorm();
    if (web.wall_distance(x) < band) {
      wall += w * (net - s).squaredNorm();
      vol += w;
    } else {
      tail += w * (net - s).squaredNorm();
    }
  });
  out.l2_error = std::sqrt(total);
  out.f_norm = std::sqrt(fn);
  out.step_error = std::sqrt(step);
  out.tail_error = std::sqrt(tail);
  out.wall_error = std::sqrt(wall);
  out.wall_volume = vol;
  return out;
}

}  // namespace quivernet
