#include "quivernet/network.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include "quivernet/errors.hpp"
#include "quivernet/parallel.hpp"

namespace quivernet {

const char* activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::None: return "none";
    case ActivationKind::Psi: return "psi";
    case ActivationKind::SigmaFramed: return "sigma";
    case ActivationKind::SigmaFull: return "sigma_full";
  }
  return "?";
}

ActivationKind parse_activation(const std::string& name) {
  if (name == "none" || name == "identity") return ActivationKind::None;
  if (name == "psi") return ActivationKind::Psi;
  if (name == "sigma") return ActivationKind::SigmaFramed;
  if (name == "sigma_full") return ActivationKind::SigmaFull;
  fail(ErrorCode::InvalidInput, "unknown activation '" + name + "' (none, psi, sigma, sigma_full)");
}

struct NetworkExpr::Node {
  Kind kind = Kind::Input;
  std::size_t index = 0;
  std::size_t head = 0;
  ActivationKind act = ActivationKind::None;
  std::vector<NetworkExpr> children;
  std::vector<double> weights;
};

NetworkExpr NetworkExpr::input(std::size_t vertex) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Input;
  n->index = vertex;
  n->head = vertex;
  return NetworkExpr(n);
}

NetworkExpr NetworkExpr::arrow(const Quiver& q, std::size_t a, NetworkExpr child) {
  if (a >= q.num_arrows()) fail(ErrorCode::InvalidInput, "arrow index out of range");
  if (child.head() != q.tail(a))
    fail(ErrorCode::InvalidInput, "arrow '" + q.arrow(a).id + "' does not start where its argument ends");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Arrow;
  n->index = a;
  n->head = q.head(a);
  n->children.push_back(std::move(child));
  return NetworkExpr(n);
}

NetworkExpr NetworkExpr::activation(std::size_t vertex, ActivationKind kind, NetworkExpr child) {
  if (child.head() != vertex) fail(ErrorCode::InvalidInput, "activation vertex differs from its argument's head");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Activation;
  n->index = vertex;
  n->head = vertex;
  n->act = kind;
  n->children.push_back(std::move(child));
  return NetworkExpr(n);
}

NetworkExpr NetworkExpr::sum(std::vector<NetworkExpr> children, std::vector<double> weights) {
  if (children.empty()) fail(ErrorCode::InvalidInput, "empty sum");
  if (weights.empty()) weights.assign(children.size(), 1.0);
  if (weights.size() != children.size()) fail(ErrorCode::InvalidInput, "sum weights do not match its terms");
  for (const auto& c : children) {
    if (c.head() != children.front().head()) fail(ErrorCode::InvalidInput, "sum terms end at different vertices");
    if (c.kind() == Kind::Activation)
      fail(ErrorCode::InvalidInput, "a sum may not combine activation outputs directly");
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::Sum;
  n->head = children.front().head();
  n->children = std::move(children);
  n->weights = std::move(weights);
  return NetworkExpr(n);
}

NetworkExpr::Kind NetworkExpr::kind() const { return node_->kind; }
std::size_t NetworkExpr::head() const { return node_->head; }
std::size_t NetworkExpr::index() const { return node_->index; }
ActivationKind NetworkExpr::activation_kind() const { return node_->act; }
const std::vector<NetworkExpr>& NetworkExpr::children() const { return node_->children; }
const std::vector<double>& NetworkExpr::weights() const { return node_->weights; }

namespace {

void collect_inputs(const NetworkExpr& e, std::set<std::size_t>& out) {
  if (e.kind() == NetworkExpr::Kind::Input) out.insert(e.index());
  for (const auto& c : e.children()) collect_inputs(c, out);
}

void collect_arrows(const NetworkExpr& e, std::set<std::size_t>& out) {
  if (e.kind() == NetworkExpr::Kind::Arrow) out.insert(e.index());
  for (const auto& c : e.children()) collect_arrows(c, out);
}

}  // namespace

std::vector<std::size_t> NetworkExpr::input_vertices() const {
  std::set<std::size_t> s;
  collect_inputs(*this, s);
  return {s.begin(), s.end()};
}

std::vector<std::size_t> NetworkExpr::arrows_used() const {
  std::set<std::size_t> s;
  collect_arrows(*this, s);
  return {s.begin(), s.end()};
}

int NetworkExpr::activation_count() const {
  int n = kind() == Kind::Activation && activation_kind() != ActivationKind::None ? 1 : 0;
  for (const auto& c : children()) n += c.activation_count();
  return n;
}

std::string NetworkExpr::to_string(const Quiver& q) const {
  switch (kind()) {
    case Kind::Input: return "e" + q.vertex_id(index());
    case Kind::Arrow: {
      const auto& c = children().front();
      std::string inner = c.kind() == Kind::Input ? "" : "*" + c.to_string(q);
      return q.arrow(index()).id + inner;
    }
    case Kind::Activation: {
      const auto& c = children().front();
      std::string inner = c.kind() == Kind::Input ? "" : "*" + c.to_string(q);
      return "o" + q.vertex_id(index()) + inner;
    }
    case Kind::Sum: {
      std::ostringstream os;
      os << "(";
      for (std::size_t k = 0; k < children().size(); ++k) {
        if (k) os << " + ";
        if (weights()[k] != 1.0) os << weights()[k] << " ";
        os << children()[k].to_string(q);
      }
      os << ")";
      return os.str();
    }
  }
  return "";
}

NetworkExpr NetworkExpr::with_children(std::vector<NetworkExpr> children) const {
  if (children.size() != node_->children.size()) fail(ErrorCode::InvalidInput, "child count changed");
  for (std::size_t k = 0; k < children.size(); ++k)
    if (children[k].head() != node_->children[k].head()) fail(ErrorCode::InvalidInput, "child head changed");
  auto n = std::make_shared<Node>(*node_);
  n->children = std::move(children);
  return NetworkExpr(n);
}

NetworkExpr strip_activations(const NetworkExpr& expr) {
  if (expr.kind() == NetworkExpr::Kind::Activation) return strip_activations(expr.children().front());
  std::vector<NetworkExpr> kids;
  for (const auto& c : expr.children()) kids.push_back(strip_activations(c));
  return expr.with_children(std::move(kids));
}

NetworkExpr feedforward_expr(const Quiver& q, const std::vector<std::size_t>& layers, ActivationKind kind) {
  if (layers.empty()) fail(ErrorCode::InvalidInput, "feedforward network needs at least one layer");
  for (std::size_t v : layers)
    if (v >= q.num_vertices()) fail(ErrorCode::InvalidInput, "layer vertex out of range");
  NetworkExpr e = NetworkExpr::input(layers.front());
  for (std::size_t k = 1; k < layers.size(); ++k) {
    std::vector<std::size_t> found;
    for (std::size_t a : q.arrows_out_of(layers[k - 1]))
      if (q.head(a) == layers[k]) found.push_back(a);
    if (found.size() != 1)
      fail(ErrorCode::InvalidInput, "layers '" + q.vertex_id(layers[k - 1]) + "' and '" + q.vertex_id(layers[k]) +
                                        "' must be joined by exactly one arrow");
    if (k > 1) e = NetworkExpr::activation(layers[k - 1], kind, e);
    e = NetworkExpr::arrow(q, found.front(), e);
  }
  return e;
}

namespace {

std::optional<NetworkExpr> dag_expr_at(const Quiver& q, const std::set<std::size_t>& inputs, std::size_t v,
                                       std::size_t output, ActivationKind kind, std::vector<int>& state,
                                       std::map<std::size_t, std::optional<NetworkExpr>>& memo) {
  if (auto it = memo.find(v); it != memo.end()) return it->second;
  if (state[v] == 1) fail(ErrorCode::HasCycle, "network expression needs an acyclic quiver");
  if (inputs.count(v)) return memo[v] = NetworkExpr::input(v);
  state[v] = 1;
  std::vector<NetworkExpr> terms;
  for (std::size_t a : q.arrows_into(v)) {
    auto sub = dag_expr_at(q, inputs, q.tail(a), output, kind, state, memo);
    if (!sub) continue;
    NetworkExpr t = *sub;
    if (!inputs.count(q.tail(a))) t = NetworkExpr::activation(q.tail(a), kind, t);
    terms.push_back(NetworkExpr::arrow(q, a, t));
  }
  state[v] = 2;
  std::optional<NetworkExpr> out;
  if (terms.size() == 1) out = terms.front();
  else if (!terms.empty()) out = NetworkExpr::sum(std::move(terms), {});
  return memo[v] = out;
}

}  // namespace

NetworkExpr dag_expr(const Quiver& q, const std::vector<std::size_t>& inputs, std::size_t output,
                     ActivationKind kind) {
  if (output >= q.num_vertices()) fail(ErrorCode::InvalidInput, "output vertex out of range");
  std::set<std::size_t> in(inputs.begin(), inputs.end());
  std::vector<int> state(q.num_vertices(), 0);
  std::map<std::size_t, std::optional<NetworkExpr>> memo;
  auto e = dag_expr_at(q, in, output, output, kind, state, memo);
  if (!e) fail(ErrorCode::InvalidInput, "output '" + q.vertex_id(output) + "' is not reachable from the inputs");
  return *e;
}

int IOSpec::input_dim(const DimVectors& dims) const {
  int n = 0;
  for (std::size_t i : inputs) n += dims.d[i];
  return n;
}

int IOSpec::output_dim(const DimVectors& dims) const {
  int n = 0;
  for (std::size_t j : outputs) n += dims.d[j];
  return n;
}

void IOSpec::validate(const Quiver& q, const DimVectors& dims) const {
  check_dims(q, dims);
  if (inputs.empty() || outputs.empty()) fail(ErrorCode::InvalidInput, "network needs inputs and outputs");
  if (exprs.size() != outputs.size()) fail(ErrorCode::InvalidInput, "one expression per output vertex is required");
  std::set<std::size_t> in;
  for (std::size_t i : inputs) {
    if (i >= q.num_vertices()) fail(ErrorCode::InvalidInput, "input vertex out of range");
    if (!in.insert(i).second) fail(ErrorCode::InvalidInput, "repeated input vertex");
  }
  std::set<std::size_t> out;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const std::size_t j = outputs[k];
    if (j >= q.num_vertices()) fail(ErrorCode::InvalidInput, "output vertex out of range");
    if (!out.insert(j).second) fail(ErrorCode::InvalidInput, "repeated output vertex");
    if (exprs[k].head() != j) fail(ErrorCode::InvalidInput, "expression does not end at output '" + q.vertex_id(j) + "'");
    for (std::size_t t : exprs[k].input_vertices())
      if (!in.count(t))
        fail(ErrorCode::InvalidInput, "expression starts at '" + q.vertex_id(t) + "', which is not an input");
    for (std::size_t a : exprs[k].arrows_used())
      if (a >= q.num_arrows()) fail(ErrorCode::InvalidInput, "expression uses an unknown arrow");
  }
}

IOSpec chain_iospec(const Quiver& q, ActivationKind kind) {
  std::vector<std::size_t> sources;
  for (std::size_t v = 0; v < q.num_vertices(); ++v)
    if (q.arrows_into(v).empty()) sources.push_back(v);
  if (sources.size() != 1) fail(ErrorCode::InvalidInput, "quiver is not a chain");
  std::vector<std::size_t> order{sources.front()};
  while (order.size() < q.num_vertices()) {
    const auto& out = q.arrows_out_of(order.back());
    if (out.size() != 1) fail(ErrorCode::InvalidInput, "quiver is not a chain");
    order.push_back(q.head(out.front()));
  }
  if (!q.arrows_out_of(order.back()).empty() || q.num_arrows() + 1 != q.num_vertices())
    fail(ErrorCode::InvalidInput, "quiver is not a chain");
  IOSpec io;
  io.inputs = {order.front()};
  io.outputs = {order.back()};
  io.exprs = {feedforward_expr(q, order, kind)};
  return io;
}

// --- evaluation --------------------------------------------------------------

namespace {

// Value plus one tangent column per direction.
struct MultiJet {
  Vector value;
  Matrix tangent;
};

struct Evaluator {
  const Quiver& q;
  const DimVectors& dims;
  const FramedRep& r;
  const MetricSet& m;
  const std::vector<FramedRep>* dr;  // null for plain evaluation
  const std::vector<std::vector<Matrix>>* dH;
  std::vector<bool> bias;  // per vertex
  const std::map<std::size_t, MultiJet>& inputs;

  Eigen::Index dirs() const { return dr ? static_cast<Eigen::Index>(dr->size()) : 0; }

  const Matrix& H(std::size_t v) const {
    if (m.H.size() != q.num_vertices() || m.H[v].rows() != dims.d[v])
      fail(ErrorCode::InvalidInput, "no metric at vertex '" + q.vertex_id(v) + "'");
    return m.H[v];
  }

  MultiJet run(const NetworkExpr& e) const {
    const Eigen::Index P = dirs();
    switch (e.kind()) {
      case NetworkExpr::Kind::Input: {
        auto it = inputs.find(e.index());
        if (it == inputs.end()) fail(ErrorCode::InvalidInput, "no input at vertex '" + q.vertex_id(e.index()) + "'");
        if (it->second.value.size() != dims.d[e.index()])
          fail(ErrorCode::ShapeMismatch, "input at '" + q.vertex_id(e.index()) + "' has wrong length");
        return it->second;
      }
      case NetworkExpr::Kind::Arrow: {
        const std::size_t a = e.index(), h = q.head(a);
        MultiJet x = run(e.children().front());
        MultiJet w{r.V[a] * x.value, r.V[a] * x.tangent};
        for (Eigen::Index p = 0; p < P; ++p) w.tangent.col(p) += (*dr)[p].V[a] * x.value;
        if (bias[h]) {
          w.value += r.e[h].col(dims.d[h]);
          for (Eigen::Index p = 0; p < P; ++p) w.tangent.col(p) += (*dr)[p].e[h].col(dims.d[h]);
        }
        return w;
      }
      case NetworkExpr::Kind::Activation: return activate(e.index(), e.activation_kind(), run(e.children().front()));
      case NetworkExpr::Kind::Sum: {
        const int d = dims.d[e.head()];
        MultiJet out{Vector::Zero(d), Matrix::Zero(d, P)};
        for (std::size_t k = 0; k < e.children().size(); ++k) {
          MultiJet c = run(e.children()[k]);
          out.value += e.weights()[k] * c.value;
          out.tangent += e.weights()[k] * c.tangent;
        }
        return out;
      }
    }
    fail(ErrorCode::InvalidInput, "bad expression node");
  }

  MultiJet activate(std::size_t v, ActivationKind kind, const MultiJet& x) const {
    if (kind == ActivationKind::None) return x;
    const Eigen::Index P = dirs();
    const Matrix& Hv = H(v);
    const Vector Hx = Hv * x.value;
    if (kind == ActivationKind::Psi) {
      MultiJet y{psi_bundle(x.value, Hv), Matrix(x.value.size(), P)};
      const double s = std::sqrt(1.0 + x.value.dot(Hx));
      for (Eigen::Index p = 0; p < P; ++p) {
        const double dq = 2.0 * Hx.dot(x.tangent.col(p)) + x.value.dot((*dH)[p][v] * x.value);
        y.tangent.col(p) = x.tangent.col(p) / s - x.value * (dq / (2.0 * s * s * s));
      }
      return y;
    }
    BaseActivation base;
    base.kind = kind == ActivationKind::SigmaFull ? BaseKind::SimplexFull : BaseKind::SimplexFramed;
    base.framed = dims.d[v];
    const Matrix& ev = r.e[v];
    const Vector z = ev.transpose() * Hx;
    const Vector bz = base.apply(z);
    MultiJet y{ev * bz, Matrix()};
    if (P > 0) {
      Matrix dz = ev.transpose() * (Hv * x.tangent);
      for (Eigen::Index p = 0; p < P; ++p)
        dz.col(p) += (*dr)[p].e[v].transpose() * Hx + ev.transpose() * ((*dH)[p][v] * x.value);
      y.tangent = ev * (base.jacobian(z) * dz);
      for (Eigen::Index p = 0; p < P; ++p) y.tangent.col(p) += (*dr)[p].e[v] * bz;
    } else {
      y.tangent = Matrix(ev.rows(), 0);
    }
    return y;
  }
};

std::vector<bool> bias_flags(const DimVectors& dims, const std::vector<std::size_t>& inputs,
                             const std::vector<std::size_t>& outputs, bool output_bias) {
  std::vector<bool> b(dims.d.size());
  for (std::size_t v = 0; v < b.size(); ++v) b[v] = dims.n[v] > dims.d[v];
  for (std::size_t j : outputs)
    if (!output_bias) b[j] = false;
  for (std::size_t i : inputs) b[i] = false;
  return b;
}

MultiJet f_tilde_impl(const Quiver& q, const DimVectors& dims, const FramedRep& r, const MetricSet& m,
                      const IOSpec& io, const Vector& s, const std::vector<FramedRep>* dr,
                      const std::vector<std::vector<Matrix>>* dH, const NetworkOptions& opts) {
  if (s.size() != io.input_dim(dims)) fail(ErrorCode::ShapeMismatch, "input coordinates have wrong length");
  const Eigen::Index P = dr ? static_cast<Eigen::Index>(dr->size()) : 0;
  std::map<std::size_t, MultiJet> in;
  Eigen::Index off = 0;
  for (std::size_t i : io.inputs) {
    const int d = dims.d[i];
    const Vector si = s.segment(off, d);
    MultiJet j{r.e[i].leftCols(d) * si, Matrix(d, P)};
    for (Eigen::Index p = 0; p < P; ++p) j.tangent.col(p) = (*dr)[p].e[i].leftCols(d) * si;
    in[i] = std::move(j);
    off += d;
  }
  Evaluator ev{q, dims, r, m, dr, dH, bias_flags(dims, io.inputs, io.outputs, opts.output_bias), in};
  MultiJet out{Vector(io.output_dim(dims)), Matrix(io.output_dim(dims), P)};
  off = 0;
  for (std::size_t k = 0; k < io.outputs.size(); ++k) {
    const std::size_t j = io.outputs[k];
    const int d = dims.d[j];
    const MultiJet w = ev.run(io.exprs[k]);
    const Matrix& Hj = ev.H(j);
    const auto E = r.e[j].leftCols(d);
    const Vector Hw = Hj * w.value;
    out.value.segment(off, d) = E.transpose() * Hw;
    if (P > 0) {
      out.tangent.middleRows(off, d) = E.transpose() * (Hj * w.tangent);
      for (Eigen::Index p = 0; p < P; ++p)
        out.tangent.block(off, p, d, 1) +=
            (*dr)[p].e[j].leftCols(d).transpose() * Hw + E.transpose() * ((*dH)[p][j] * w.value);
    }
    off += d;
  }
  return out;
}

void check_tangents(const Quiver& q, const DimVectors& dims, const std::vector<FramedRep>& tangents,
                    const std::vector<std::vector<Matrix>>& dH) {
  if (dH.size() != tangents.size()) fail(ErrorCode::ShapeMismatch, "one metric derivative per tangent is required");
  for (std::size_t p = 0; p < tangents.size(); ++p) {
    check_shapes(q, dims, tangents[p]);
    if (dH[p].size() != q.num_vertices()) fail(ErrorCode::ShapeMismatch, "metric derivative has wrong length");
  }
}

}  // namespace

Vector eval_expr(const Quiver& q, const DimVectors& dims, const NetworkExpr& expr, const FramedRep& rep,
                 const MetricSet& metrics, const std::map<std::size_t, Vector>& inputs, const NetworkOptions& opts) {
  check_shapes(q, dims, rep);
  std::map<std::size_t, MultiJet> in;
  for (const auto& [v, x] : inputs) in[v] = MultiJet{x, Matrix(x.size(), 0)};
  Evaluator ev{q, dims, rep, metrics, nullptr, nullptr,
               bias_flags(dims, expr.input_vertices(), {expr.head()}, opts.output_bias), in};
  return ev.run(expr).value;
}

Vector eval_f_tilde(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
                    const IOSpec& io, const Vector& s, const NetworkOptions& opts) {
  io.validate(q, dims);
  check_shapes(q, dims, rep);
  return f_tilde_impl(q, dims, rep, metrics, io, s, nullptr, nullptr, opts).value;
}

Vector eval_L(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
              const IOSpec& io, const Vector& s, const NetworkOptions& opts) {
  IOSpec linear = io;
  for (auto& e : linear.exprs) e = strip_activations(e);
  return eval_f_tilde(q, dims, rep, metrics, linear, s, opts);
}

Jet eval_f_tilde_jvp(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
                     const IOSpec& io, const Vector& s, const FramedRep& tangent, const std::vector<Matrix>& dH,
                     const NetworkOptions& opts) {
  io.validate(q, dims);
  check_shapes(q, dims, rep);
  const std::vector<FramedRep> dirs{tangent};
  const std::vector<std::vector<Matrix>> dHs{dH};
  check_tangents(q, dims, dirs, dHs);
  MultiJet j = f_tilde_impl(q, dims, rep, metrics, io, s, &dirs, &dHs, opts);
  return Jet{j.value, j.tangent.col(0)};
}

Vector eval_f_U(const Matrix& W1, const Matrix& W2, const Vector& b, const BaseMap& base, const Vector& s) {
  if (W1.cols() != s.size() || W1.rows() != b.size() || W2.cols() != W1.rows())
    fail(ErrorCode::ShapeMismatch, "eval_f_U: shapes do not compose");
  return W2 * base(W1 * s + b);
}

Vector eval_flat(const Quiver& q, const DimVectors& dims, const ChartPoint& c, const IOSpec& io, const Vector& s,
                 const NetworkOptions& opts) {
  io.validate(q, dims);
  const std::vector<bool> bias = bias_flags(dims, io.inputs, io.outputs, opts.output_bias);
  if (s.size() != io.input_dim(dims)) fail(ErrorCode::ShapeMismatch, "input coordinates have wrong length");
  std::map<std::size_t, Vector> in;
  Eigen::Index off = 0;
  for (std::size_t i : io.inputs) {
    in[i] = s.segment(off, dims.d[i]);
    off += dims.d[i];
  }
  std::function<Vector(const NetworkExpr&)> run = [&](const NetworkExpr& e) -> Vector {
    switch (e.kind()) {
      case NetworkExpr::Kind::Input: return in.at(e.index());
      case NetworkExpr::Kind::Arrow: {
        const std::size_t h = q.head(e.index());
        Vector w = c.W[e.index()] * run(e.children().front());
        if (bias[h]) w += c.b[h].col(0);
        return w;
      }
      case NetworkExpr::Kind::Activation: {
        Vector x = run(e.children().front());
        switch (e.activation_kind()) {
          case ActivationKind::None: return x;
          case ActivationKind::Psi: return psi_disc(x);
          default: return sigma_simplex(x);
        }
      }
      case NetworkExpr::Kind::Sum: {
        Vector out = Vector::Zero(dims.d[e.head()]);
        for (std::size_t k = 0; k < e.children().size(); ++k) out += e.weights()[k] * run(e.children()[k]);
        return out;
      }
    }
    return Vector();
  };
  Vector out(io.output_dim(dims));
  off = 0;
  for (std::size_t k = 0; k < io.outputs.size(); ++k) {
    const int d = dims.d[io.outputs[k]];
    out.segment(off, d) = run(io.exprs[k]);
    off += d;
  }
  return out;
}

// --- loss ----------------------------------------------------------------------

Samples dataset_samples(const Matrix& X, const Matrix& Y) {
  if (X.rows() == 0) fail(ErrorCode::EmptyDataset, "dataset has no rows");
  if (Y.rows() != X.rows()) fail(ErrorCode::ShapeMismatch, "inputs and targets have different row counts");
  return Samples{X, Y, Vector::Constant(X.rows(), 1.0 / static_cast<double>(X.rows()))};
}

Samples quadrature_samples(const Vector& lo, const Vector& hi, const std::function<Vector(const Vector&)>& f,
                           int d_out, const QuadratureOptions& opts) {
  const Eigen::Index dim = lo.size();
  if (dim == 0 || hi.size() != dim) fail(ErrorCode::ShapeMismatch, "quadrature box has wrong dimension");
  if ((hi.array() <= lo.array()).any()) fail(ErrorCode::InvalidInput, "quadrature box is empty");
  const double volume = (hi - lo).prod();
  Matrix X;
  if (dim <= 2) {
    const int k = opts.grid_per_axis;
    if (k < 1) fail(ErrorCode::InvalidInput, "grid needs at least one point per axis");
    const Eigen::Index n = dim == 1 ? k : static_cast<Eigen::Index>(k) * k;
    X.resize(n, dim);
    for (Eigen::Index row = 0; row < n; ++row) {
      Eigen::Index rest = row;
      for (Eigen::Index c = 0; c < dim; ++c) {
        const double t = (static_cast<double>(rest % k) + 0.5) / k;
        X(row, c) = lo(c) + t * (hi(c) - lo(c));
        rest /= k;
      }
    }
  } else {
    if (opts.monte_carlo < 1) fail(ErrorCode::InvalidInput, "Monte Carlo needs at least one sample");
    Rng rng(opts.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    X.resize(opts.monte_carlo, dim);
    for (Eigen::Index row = 0; row < X.rows(); ++row)
      for (Eigen::Index c = 0; c < dim; ++c) X(row, c) = lo(c) + u(rng) * (hi(c) - lo(c));
  }
  Matrix Y(X.rows(), d_out);
  for (Eigen::Index row = 0; row < X.rows(); ++row) {
    Vector y = f(X.row(row).transpose());
    if (y.size() != d_out) fail(ErrorCode::ShapeMismatch, "target function returned the wrong length");
    Y.row(row) = y.transpose();
  }
  return Samples{X, Y, Vector::Constant(X.rows(), volume / static_cast<double>(X.rows()))};
}

Matrix output_weight(const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics, std::size_t j,
                     bool euclidean) {
  const int d = dims.d[j];
  if (euclidean) return Matrix::Identity(d, d);
  const auto E = rep.e[j].leftCols(d);
  return E.transpose() * metrics.H[j] * E;
}

namespace {

void check_samples(const IOSpec& io, const DimVectors& dims, const Samples& data) {
  if (data.size() == 0) fail(ErrorCode::EmptyDataset, "no samples");
  if (data.X.cols() != io.input_dim(dims) || data.Y.cols() != io.output_dim(dims) ||
      data.Y.rows() != data.X.rows() || data.w.size() != data.X.rows())
    fail(ErrorCode::ShapeMismatch, "samples do not match the network's input/output sizes");
}

Matrix block_weight(const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics, const IOSpec& io,
                    bool euclidean, const FramedRep* dr, const std::vector<Matrix>* dH) {
  const int n = io.output_dim(dims);
  Matrix M = Matrix::Zero(n, n);
  Eigen::Index off = 0;
  for (std::size_t j : io.outputs) {
    const int d = dims.d[j];
    if (!dr) {
      M.block(off, off, d, d) = output_weight(dims, rep, metrics, j, euclidean);
    } else if (!euclidean) {
      const auto E = rep.e[j].leftCols(d);
      const auto dE = dr->e[j].leftCols(d);
      const Matrix& H = metrics.H[j];
      Matrix dEHE = dE.transpose() * H * E;
      M.block(off, off, d, d) = dEHE + dEHE.transpose() + E.transpose() * (*dH)[j] * E;
    }
    off += d;
  }
  return M;
}

// Ordered reduction of per-sample terms.
double reduce(std::size_t n, const std::function<double(std::size_t)>& term) {
  std::vector<double> parts(n);
  parallel_for(n, [&](std::size_t k) { parts[k] = term(k); });
  double total = 0;
  for (double p : parts) total += p;
  return total;
}

}  // namespace

double loss(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
            const IOSpec& io, const Samples& data, const NetworkOptions& opts) {
  io.validate(q, dims);
  check_shapes(q, dims, rep);
  check_samples(io, dims, data);
  if (metrics.H.size() != q.num_vertices()) fail(ErrorCode::InvalidInput, "metrics are missing");
  const Matrix M = block_weight(dims, rep, metrics, io, opts.euclidean_loss, nullptr, nullptr);
  return reduce(data.size(), [&](std::size_t k) {
    const Vector c =
        f_tilde_impl(q, dims, rep, metrics, io, data.X.row(k).transpose(), nullptr, nullptr, opts).value;
    const Vector delta = data.Y.row(k).transpose() - c;
    return data.w(k) * delta.dot(M * delta);
  });
}

Vector loss_derivatives(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
                        const IOSpec& io, const Samples& data, const std::vector<FramedRep>& tangents,
                        const std::vector<std::vector<Matrix>>& dH, const NetworkOptions& opts) {
  io.validate(q, dims);
  check_shapes(q, dims, rep);
  check_samples(io, dims, data);
  check_tangents(q, dims, tangents, dH);
  if (metrics.H.size() != q.num_vertices()) fail(ErrorCode::InvalidInput, "metrics are missing");
  const std::size_t P = tangents.size();
  const Matrix M = block_weight(dims, rep, metrics, io, opts.euclidean_loss, nullptr, nullptr);
  std::vector<Matrix> dM(P);
  for (std::size_t p = 0; p < P; ++p)
    dM[p] = block_weight(dims, rep, metrics, io, opts.euclidean_loss, &tangents[p], &dH[p]);
  std::vector<Vector> parts(data.size());
  parallel_for(data.size(), [&](std::size_t k) {
    const MultiJet c = f_tilde_impl(q, dims, rep, metrics, io, data.X.row(k).transpose(), &tangents, &dH, opts);
    const Vector delta = data.Y.row(k).transpose() - c.value;
    Vector g = -2.0 * (c.tangent.transpose() * (M * delta));
    for (std::size_t p = 0; p < P; ++p) g(p) += delta.dot(dM[p] * delta);
    parts[k] = data.w(k) * g;
  });
  Vector total = Vector::Zero(static_cast<Eigen::Index>(P));
  for (const auto& g : parts) total += g;
  return total;
}

}  // namespace quivernet
