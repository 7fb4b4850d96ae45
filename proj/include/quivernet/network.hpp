#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "quivernet/metrics.hpp"
#include "quivernet/toric.hpp"

namespace quivernet {

// Activation arrow kinds. SigmaFramed uses the simplex map on the first d_i
// framing coordinates (bias slot ignored); SigmaFull uses all n_i.
enum class ActivationKind { None, Psi, SigmaFramed, SigmaFull };

const char* activation_name(ActivationKind kind);
ActivationKind parse_activation(const std::string& name);  // throws InvalidInput

// Element of the path semiring with activation arrows, stored as an immutable
// tree. Arrow nodes are affine (V_a x + bias at the head).
class NetworkExpr {
 public:
  enum class Kind { Input, Arrow, Activation, Sum };

  static NetworkExpr input(std::size_t vertex);
  // Throws InvalidInput unless child's head is the arrow's tail.
  static NetworkExpr arrow(const Quiver& q, std::size_t a, NetworkExpr child);
  static NetworkExpr activation(std::size_t vertex, ActivationKind kind, NetworkExpr child);
  // Children share one head. A sum may not take an activation output
  // directly; combinations live on the input side of an activation.
  static NetworkExpr sum(std::vector<NetworkExpr> children, std::vector<double> weights);

  Kind kind() const;
  std::size_t head() const;
  std::size_t index() const;  // arrow index or vertex
  ActivationKind activation_kind() const;
  const std::vector<NetworkExpr>& children() const;
  const std::vector<double>& weights() const;

  std::vector<std::size_t> input_vertices() const;  // sorted, unique
  int activation_count() const;
  std::vector<std::size_t> arrows_used() const;     // sorted, unique
  std::string to_string(const Quiver& q) const;     // e.g. "a2*o2*a1"

  // Same node over new children with the same heads.
  NetworkExpr with_children(std::vector<NetworkExpr> children) const;

 private:
  struct Node;
  std::shared_ptr<const Node> node_;
  explicit NetworkExpr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
};

// Copy of expr with every activation node removed.
NetworkExpr strip_activations(const NetworkExpr& expr);

// a_k * o_{v_{k-1}} * ... * o_{v_1} * a_1 along the vertex sequence `layers`,
// each consecutive pair joined by exactly one arrow.
NetworkExpr feedforward_expr(const Quiver& q, const std::vector<std::size_t>& layers,
                             ActivationKind kind = ActivationKind::SigmaFramed);

// Sum over every arrow path from the inputs to `output`, with an activation
// at each intermediate vertex. Throws HasCycle on cyclic quivers.
NetworkExpr dag_expr(const Quiver& q, const std::vector<std::size_t>& inputs, std::size_t output,
                     ActivationKind kind = ActivationKind::SigmaFramed);

struct IOSpec {
  std::vector<std::size_t> inputs;
  std::vector<std::size_t> outputs;
  std::vector<NetworkExpr> exprs;  // one per output vertex, same order

  int input_dim(const DimVectors& dims) const;
  int output_dim(const DimVectors& dims) const;
  void validate(const Quiver& q, const DimVectors& dims) const;  // throws InvalidInput
};

// Chain network on a quiver whose arrows form a single path through every
// vertex: input at the first vertex, output at the last.
IOSpec chain_iospec(const Quiver& q, ActivationKind kind = ActivationKind::SigmaFramed);

struct NetworkOptions {
  bool output_bias = false;     // add the framing bias at output vertices
  bool euclidean_loss = false;  // plain squared error instead of the H_j norm
};

// Inputs are fiber vectors keyed by input vertex.
Vector eval_expr(const Quiver& q, const DimVectors& dims, const NetworkExpr& expr, const FramedRep& rep,
                 const MetricSet& metrics, const std::map<std::size_t, Vector>& inputs,
                 const NetworkOptions& opts = {});

// Output coordinates H_j(e_p, w_j) for p <= d_j, concatenated over outputs.
Vector eval_f_tilde(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
                    const IOSpec& io, const Vector& s, const NetworkOptions& opts = {});

// The same with every activation removed.
Vector eval_L(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
              const IOSpec& io, const Vector& s, const NetworkOptions& opts = {});

// Value and directional derivative of eval_f_tilde along a tangent (dV, de)
// with metric derivative dH (one matrix per vertex).
struct Jet {
  Vector value;
  Vector tangent;
};
Jet eval_f_tilde_jvp(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
                     const IOSpec& io, const Vector& s, const FramedRep& tangent,
                     const std::vector<Matrix>& dH, const NetworkOptions& opts = {});

// W2 * base(W1 s + b).
Vector eval_f_U(const Matrix& W1, const Matrix& W2, const Vector& b, const BaseMap& base, const Vector& s);

// Flat chart network: arrows W x + (first b column), activations applied to
// the coordinates directly (sigma_simplex or psi_disc), outputs read as is.
Vector eval_flat(const Quiver& q, const DimVectors& dims, const ChartPoint& c, const IOSpec& io, const Vector& s,
                 const NetworkOptions& opts = {});

// Sample points with targets and quadrature weights.
struct Samples {
  Matrix X;  // N x d_in
  Matrix Y;  // N x d_out
  Vector w;  // N
  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
};

// Dataset rows with equal weights 1/N. Throws EmptyDataset.
Samples dataset_samples(const Matrix& X, const Matrix& Y);

struct QuadratureOptions {
  int grid_per_axis = 64;      // used when d_in <= 2
  int monte_carlo = 4096;      // used otherwise
  std::uint64_t seed = 0;
};

// Midpoint grid (d_in <= 2) or seeded uniform Monte Carlo on the box [lo, hi];
// weights sum to the box volume.
Samples quadrature_samples(const Vector& lo, const Vector& hi, const std::function<Vector(const Vector&)>& f,
                           int d_out, const QuadratureOptions& opts = {});

// sum_k w_k |y_k - f~(x_k)|^2, the norm taken with H_j on the first d_j
// framing vectors at each output (or Euclidean).
double loss(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
            const IOSpec& io, const Samples& data, const NetworkOptions& opts = {});

// Directional derivatives of loss along each tangent, dH[p] being the metric
// derivative along tangents[p]. One forward pass per sample.
Vector loss_derivatives(const Quiver& q, const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics,
                        const IOSpec& io, const Samples& data, const std::vector<FramedRep>& tangents,
                        const std::vector<std::vector<Matrix>>& dH, const NetworkOptions& opts = {});

// Output weight matrix at output vertex j: E^T H_j E with E the first d_j framing columns.
Matrix output_weight(const DimVectors& dims, const FramedRep& rep, const MetricSet& metrics, std::size_t j,
                     bool euclidean);

}  // namespace quivernet
