#include "quivernet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "quivernet/errors.hpp"

namespace quivernet {

ChartLayout::ChartLayout(const Quiver& q, const DimVectors& dims) : q_(&q), dims_(dims) {
  check_dims(q, dims);
  for (std::size_t i = 0; i < q.num_vertices(); ++i)
    if (dims.n[i] < dims.d[i]) fail(ErrorCode::ShapeMismatch, "chart needs n_i >= d_i at vertex '" + q.vertex_id(i) + "'");
  for (std::size_t a = 0; a < q.num_arrows(); ++a) {
    w_off_.push_back(size_);
    size_ += static_cast<Eigen::Index>(dims.d[q.head(a)]) * dims.d[q.tail(a)];
  }
  for (std::size_t i = 0; i < q.num_vertices(); ++i) {
    b_off_.push_back(size_);
    size_ += static_cast<Eigen::Index>(dims.d[i]) * (dims.n[i] - dims.d[i]);
  }
}

Vector ChartLayout::flatten(const ChartPoint& c) const {
  if (c.W.size() != q_->num_arrows() || c.b.size() != q_->num_vertices())
    fail(ErrorCode::ShapeMismatch, "chart point does not match the layout");
  Vector x(size_);
  for (std::size_t a = 0; a < c.W.size(); ++a) {
    if (c.W[a].rows() != dims_.d[q_->head(a)] || c.W[a].cols() != dims_.d[q_->tail(a)])
      fail(ErrorCode::ShapeMismatch, "chart weight has wrong shape");
    x.segment(w_off_[a], c.W[a].size()) = c.W[a].reshaped();
  }
  for (std::size_t i = 0; i < c.b.size(); ++i) {
    if (c.b[i].rows() != dims_.d[i] || c.b[i].cols() != dims_.n[i] - dims_.d[i])
      fail(ErrorCode::ShapeMismatch, "chart bias block has wrong shape");
    x.segment(b_off_[i], c.b[i].size()) = c.b[i].reshaped();
  }
  return x;
}

ChartPoint ChartLayout::unflatten(const Vector& x) const {
  if (x.size() != size_) fail(ErrorCode::ShapeMismatch, "flat chart vector has wrong length");
  ChartPoint c;
  for (std::size_t a = 0; a < q_->num_arrows(); ++a) {
    const int rows = dims_.d[q_->head(a)], cols = dims_.d[q_->tail(a)];
    c.W.push_back(x.segment(w_off_[a], static_cast<Eigen::Index>(rows) * cols).reshaped(rows, cols));
  }
  for (std::size_t i = 0; i < q_->num_vertices(); ++i) {
    const int rows = dims_.d[i], cols = dims_.n[i] - dims_.d[i];
    c.b.push_back(x.segment(b_off_[i], static_cast<Eigen::Index>(rows) * cols).reshaped(rows, cols));
  }
  return c;
}

FramedRep ChartLayout::direction(Eigen::Index k) const {
  if (k < 0 || k >= size_) fail(ErrorCode::InvalidInput, "chart coordinate out of range");
  FramedRep t = zero_rep<double>(*q_, dims_);
  for (std::size_t a = 0; a < q_->num_arrows(); ++a) {
    const Eigen::Index off = k - w_off_[a];
    if (off >= 0 && off < t.V[a].size()) {
      t.V[a](off % t.V[a].rows(), off / t.V[a].rows()) = 1.0;
      return t;
    }
  }
  for (std::size_t i = 0; i < q_->num_vertices(); ++i) {
    const int d = dims_.d[i];
    const Eigen::Index off = k - b_off_[i];
    if (d > 0 && off >= 0 && off < static_cast<Eigen::Index>(d) * (dims_.n[i] - d)) {
      t.e[i](off % d, d + off / d) = 1.0;
      return t;
    }
  }
  fail(ErrorCode::InvalidInput, "chart coordinate out of range");
}

std::vector<FramedRep> ChartLayout::basis() const {
  std::vector<FramedRep> out;
  out.reserve(static_cast<std::size_t>(size_));
  for (Eigen::Index k = 0; k < size_; ++k) out.push_back(direction(k));
  return out;
}

const char* metric_mode_name(MetricMode m) { return m == MetricMode::RicciHT ? "ricci" : "euclidean"; }

MetricMode parse_metric_mode(const std::string& s) {
  if (s == "euclidean") return MetricMode::EuclideanChart;
  if (s == "ricci") return MetricMode::RicciHT;
  fail(ErrorCode::InvalidInput, "unknown metric mode '" + s + "' (euclidean, ricci)");
}

void TrainConfig::validate() const {
  if (steps < 0) fail(ErrorCode::InvalidInput, "steps must be nonnegative");
  if (!(step_size > 0) || !std::isfinite(step_size)) fail(ErrorCode::InvalidInput, "step size must be positive");
  if (!(fd_h >= 1e-8 && fd_h <= 1e-3)) fail(ErrorCode::InvalidInput, "finite-difference step must lie in [1e-8, 1e-3]");
  if (batch_size < 0) fail(ErrorCode::InvalidInput, "batch size must be nonnegative");
  if (!(grad_tol >= 0)) fail(ErrorCode::InvalidInput, "gradient tolerance must be nonnegative");
  if (!(init_scale >= 0)) fail(ErrorCode::InvalidInput, "initialization scale must be nonnegative");
}

Vector differential(const ChartLayout& layout, const ChartObjective& f, const ChartPoint& p, const TrainConfig& cfg) {
  if (cfg.gradient == GradientMode::Analytic && f.differential) {
    Vector g = f.differential(p);
    if (g.size() != layout.size()) fail(ErrorCode::ShapeMismatch, "differential has wrong length");
    return g;
  }
  const Vector x = layout.flatten(p);
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector xp = x, xm = x;
    xp(k) += cfg.fd_h;
    xm(k) -= cfg.fd_h;
    g(k) = (f.value(layout.unflatten(xp)) - f.value(layout.unflatten(xm))) / (2 * cfg.fd_h);
  }
  return g;
}

Vector raise_index(const Quiver& q, const DimVectors& dims, const FramedRep& r, const MetricSet& m,
                   const std::vector<FramedRep>& dirs, const Vector& dE, double singular_tol) {
  if (static_cast<Eigen::Index>(dirs.size()) != dE.size())
    fail(ErrorCode::ShapeMismatch, "one direction per differential entry is required");
  if (dirs.empty()) return Vector();
  TangentMetricT<double> hT(q, dims, r, m);
  const Matrix G = hermitian_part(hT.gram(dirs));
  const Vector ev = hermitian_eigenvalues(G);
  if (!(ev.minCoeff() > singular_tol * std::max(1.0, ev.maxCoeff())))
    fail(ErrorCode::SingularMetric, "tangent metric Gram matrix is not positive definite on the chosen directions");
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() != Eigen::Success) fail(ErrorCode::SingularMetric, "tangent metric Gram matrix factorization failed");
  return llt.solve(dE);
}

Vector gradient(const Quiver& q, const DimVectors& dims, const ChartObjective& f, const ChartPoint& p,
                const TrainConfig& cfg) {
  ChartLayout layout(q, dims);
  Vector dE = differential(layout, f, p, cfg);
  if (cfg.metric == MetricMode::EuclideanChart) return dE;
  FramedRep r = from_chart(q, dims, p);
  MetricSet m = vertex_metrics(q, dims, r, cfg.metrics);
  return raise_index(q, dims, r, m, layout.basis(), dE, cfg.singular_tol);
}

ChartObjective network_objective(const Quiver& q, const DimVectors& dims, const IOSpec& io, const Samples& data,
                                 const NetworkOptions& net, const MetricOptions& metrics) {
  io.validate(q, dims);
  ChartObjective f;
  f.value = [&q, dims, io, data, net, metrics](const ChartPoint& p) {
    FramedRep r = from_chart(q, dims, p);
    return loss(q, dims, r, vertex_metrics(q, dims, r, metrics), io, data, net);
  };
  f.differential = [&q, dims, io, data, net, metrics](const ChartPoint& p) {
    ChartLayout layout(q, dims);
    FramedRep r = from_chart(q, dims, p);
    MetricSet m = vertex_metrics(q, dims, r, metrics);
    std::vector<FramedRep> dirs = layout.basis();
    std::vector<std::vector<Matrix>> dH;
    dH.reserve(dirs.size());
    for (const auto& t : dirs) dH.push_back(metric_derivative(q, dims, r, m, t));
    return loss_derivatives(q, dims, r, m, io, data, dirs, dH, net);
  };
  return f;
}

// --- symmetry reduction ----------------------------------------------------------

void check_reduction_arrows(const Quiver& q, const IOSpec& io, const std::vector<std::size_t>& arrows) {
  std::set<std::size_t> boundary(io.inputs.begin(), io.inputs.end());
  boundary.insert(io.outputs.begin(), io.outputs.end());
  std::set<std::size_t> used;
  for (std::size_t a : arrows) {
    if (a >= q.num_arrows()) fail(ErrorCode::InvalidInput, "arrow index out of range");
    const std::string& id = q.arrow(a).id;
    if (boundary.count(q.head(a)) || boundary.count(q.tail(a)))
      fail(ErrorCode::AdjacencyViolation, "arrow '" + id + "' touches an input or output vertex");
    if (q.head(a) == q.tail(a)) fail(ErrorCode::AdjacencyViolation, "arrow '" + id + "' is a loop");
    if (used.count(q.head(a)) || used.count(q.tail(a)))
      fail(ErrorCode::AdjacencyViolation, "arrow '" + id + "' shares a vertex with another reduced arrow");
    used.insert(q.head(a));
    used.insert(q.tail(a));
  }
}

std::vector<std::size_t> eligible_reduction_arrows(const Quiver& q, const IOSpec& io) {
  std::vector<std::size_t> chosen;
  for (std::size_t a = 0; a < q.num_arrows(); ++a) {
    chosen.push_back(a);
    try {
      check_reduction_arrows(q, io, chosen);
    } catch (const Error&) {
      chosen.pop_back();
    }
  }
  return chosen;
}

namespace {

bool leading_block_diagonal(const Matrix& W) {
  const Eigen::Index k = std::min(W.rows(), W.cols());
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index r = 0; r < k; ++r)
      if (r != c && W(r, c) != 0.0) return false;
  return true;
}

}  // namespace

SymmetryReduction symmetry_reduce(const Quiver& q, const DimVectors& dims, const IOSpec& io, const ChartPoint& point,
                                  const std::vector<std::size_t>& arrows) {
  check_reduction_arrows(q, io, arrows);
  ChartLayout layout(q, dims);
  layout.flatten(point);  // shape check
  SymmetryReduction red;
  red.point = point;
  red.arrows = arrows;
  red.free_mask = Vector::Ones(layout.size());
  for (std::size_t a : arrows) {
    const std::size_t h = q.head(a), t = q.tail(a);
    const Matrix W = red.point.W[a];
    const Eigen::Index k = std::min(W.rows(), W.cols());
    for (Eigen::Index c = 0; c < k; ++c)
      for (Eigen::Index r = 0; r < k; ++r)
        if (r != c) red.free_mask(layout.w_offset(a) + c * W.rows() + r) = 0.0;
    if (leading_block_diagonal(W)) continue;
    Eigen::JacobiSVD<Matrix> svd(W, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // W = U S V^T: act by U^T at the head and V^T at the tail.
    const Matrix gh = svd.matrixU().transpose();
    const Matrix gt = svd.matrixV().transpose();
    for (std::size_t b = 0; b < q.num_arrows(); ++b) {
      if (q.head(b) == h) red.point.W[b] = gh * red.point.W[b];
      if (q.tail(b) == h) red.point.W[b] = red.point.W[b] * gh.transpose();
      if (q.head(b) == t) red.point.W[b] = gt * red.point.W[b];
      if (q.tail(b) == t) red.point.W[b] = red.point.W[b] * gt.transpose();
    }
    red.point.b[h] = gh * red.point.b[h];
    red.point.b[t] = gt * red.point.b[t];
    Matrix& Wr = red.point.W[a];
    for (Eigen::Index c = 0; c < k; ++c)
      for (Eigen::Index r = 0; r < k; ++r)
        if (r != c) Wr(r, c) = 0.0;  // rounding residue
  }
  return red;
}

// --- training --------------------------------------------------------------------

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::StepBudget: return "step_budget";
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::StepUnderflow: return "step_underflow";
  }
  return "?";
}

ChartPoint random_chart_point(const Quiver& q, const DimVectors& dims, Rng& rng, double scale) {
  ChartLayout layout(q, dims);
  Vector x = random_gaussian<double>(layout.size(), 1, rng, scale);
  return layout.unflatten(x);
}

namespace {

Samples minibatch(const Samples& data, int batch, Rng& rng) {
  const std::size_t n = data.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates with explicit draws so the sequence is portable
  for (int k = 0; k < batch; ++k) {
    const std::size_t j = static_cast<std::size_t>(k) + rng() % (n - static_cast<std::size_t>(k));
    std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
  }
  Samples s;
  s.X.resize(batch, data.X.cols());
  s.Y.resize(batch, data.Y.cols());
  s.w.resize(batch);
  const double scale = static_cast<double>(n) / batch;
  for (int k = 0; k < batch; ++k) {
    s.X.row(k) = data.X.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]));
    s.Y.row(k) = data.Y.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]));
    s.w(k) = data.w(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)])) * scale;
  }
  return s;
}

bool domain_failure(ErrorCode c) {
  return c == ErrorCode::OutsideDomain || c == ErrorCode::SingularGram || c == ErrorCode::NotStable ||
         c == ErrorCode::NotPositiveDefinite || c == ErrorCode::SingularFrame;
}

}  // namespace

TrainReport train(const Quiver& q, const DimVectors& dims, const IOSpec& io, const Samples& data,
                  const TrainConfig& cfg, const std::optional<ChartPoint>& init) {
  cfg.validate();
  io.validate(q, dims);
  const auto start = std::chrono::steady_clock::now();
  ChartLayout layout(q, dims);
  Rng rng(cfg.seed);
  ChartPoint point = init ? *init : random_chart_point(q, dims, rng, cfg.init_scale);
  layout.flatten(point);

  std::optional<SymmetryReduction> red;
  if (cfg.symmetry_reduction) {
    auto arrows = cfg.reduce_arrows.empty() ? eligible_reduction_arrows(q, io) : cfg.reduce_arrows;
    red = symmetry_reduce(q, dims, io, point, arrows);
    point = red->point;
  }

  const bool full_batch = cfg.batch_size == 0 || static_cast<std::size_t>(cfg.batch_size) >= data.size();
  const ChartObjective full = network_objective(q, dims, io, data, cfg.net, cfg.metrics);

  auto evaluate = [&](const ChartPoint& p) {
    const double v = full.value(p);
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "loss is not finite");
    return v;
  };

  TrainReport rep;
  double current;
  try {
    current = evaluate(point);
  } catch (const Error& e) {
    if (domain_failure(e.code())) fail(ErrorCode::ChartExit, std::string("initial point: ") + e.what());
    throw;
  }
  rep.loss_trace.push_back(current);
  double lr = cfg.step_size;
  rep.termination = Termination::StepBudget;

  for (int step = 0; step < cfg.steps; ++step) {
    ChartObjective obj = full;
    if (!full_batch) obj = network_objective(q, dims, io, minibatch(data, cfg.batch_size, rng), cfg.net, cfg.metrics);
    Vector g = gradient(q, dims, obj, point, cfg);
    if (red) g = red->project(g);
    if (!g.allFinite()) fail(ErrorCode::NonFinite, "gradient is not finite");
    rep.grad_norm_trace.push_back(g.norm());
    if (g.norm() < cfg.grad_tol) {
      rep.termination = Termination::GradientTolerance;
      break;
    }
    const Vector x = layout.flatten(point);
    ChartPoint next;
    double value = 0;
    bool underflow = false;
    while (true) {
      next = layout.unflatten(x - lr * g);
      bool accepted = true;
      try {
        value = evaluate(next);
      } catch (const Error& e) {
        if (!domain_failure(e.code())) throw;
        if (!full_batch || !cfg.halving) fail(ErrorCode::ChartExit, std::string("step left the chart: ") + e.what());
        accepted = false;
      }
      if (accepted && (!full_batch || !cfg.halving || value <= current)) break;
      lr /= 2;
      if (lr < cfg.min_step) {
        underflow = true;
        break;
      }
    }
    if (underflow) {
      rep.termination = Termination::StepUnderflow;
      break;
    }
    point = next;
    current = value;
    rep.loss_trace.push_back(current);
    rep.steps_taken = step + 1;
  }
  rep.final_point = point;
  rep.final_step_size = lr;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace quivernet
