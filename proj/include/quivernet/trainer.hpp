#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "quivernet/network.hpp"

namespace quivernet {

// Flat coordinates of a chart point: every W_a (column-major) in arrow order,
// then every b_i in vertex order.
class ChartLayout {
 public:
  ChartLayout(const Quiver& q, const DimVectors& dims);

  Eigen::Index size() const { return size_; }
  Eigen::Index w_offset(std::size_t a) const { return w_off_[a]; }
  Eigen::Index b_offset(std::size_t i) const { return b_off_[i]; }

  Vector flatten(const ChartPoint& c) const;
  ChartPoint unflatten(const Vector& x) const;
  // Tangent (dV, de) of coordinate k at any chart point.
  FramedRep direction(Eigen::Index k) const;
  std::vector<FramedRep> basis() const;

 private:
  const Quiver* q_;
  DimVectors dims_;
  std::vector<Eigen::Index> w_off_, b_off_;
  Eigen::Index size_ = 0;
};

enum class MetricMode { EuclideanChart, RicciHT };
enum class GradientMode { Analytic, FiniteDifference };

const char* metric_mode_name(MetricMode m);
MetricMode parse_metric_mode(const std::string& s);  // "euclidean" | "ricci"

struct TrainConfig {
  int steps = 1000;
  double step_size = 1e-2;
  MetricMode metric = MetricMode::EuclideanChart;
  GradientMode gradient = GradientMode::Analytic;
  double fd_h = 1e-5;
  int batch_size = 0;  // 0 or >= dataset size: full batch
  std::uint64_t seed = 0;
  bool symmetry_reduction = false;
  std::vector<std::size_t> reduce_arrows;  // empty: every eligible arrow, greedily
  double grad_tol = 1e-10;
  double init_scale = 0.1;
  bool halving = true;  // full batch only
  double min_step = 1e-14;
  double singular_tol = 1e-12;  // relative eigenvalue floor of the H_T Gram matrix
  NetworkOptions net;
  MetricOptions metrics;

  void validate() const;  // throws InvalidInput
};

// Smooth function of a chart point. `differential` (optional) returns the
// partial derivatives in ChartLayout order.
struct ChartObjective {
  std::function<double(const ChartPoint&)> value;
  std::function<Vector(const ChartPoint&)> differential;
};

// Partial derivatives, analytic or by central differences.
Vector differential(const ChartLayout& layout, const ChartObjective& f, const ChartPoint& p, const TrainConfig& cfg);

// Solves G x = dE with G_kl = H_T(dirs[k], dirs[l]). Throws SingularMetric.
Vector raise_index(const Quiver& q, const DimVectors& dims, const FramedRep& r, const MetricSet& m,
                   const std::vector<FramedRep>& dirs, const Vector& dE, double singular_tol = 1e-12);

// dE raised by the chosen metric (identity in EuclideanChart mode).
Vector gradient(const Quiver& q, const DimVectors& dims, const ChartObjective& f, const ChartPoint& p,
                const TrainConfig& cfg);

// Loss of the network at chart points, with the analytic differential.
ChartObjective network_objective(const Quiver& q, const DimVectors& dims, const IOSpec& io, const Samples& data,
                                 const NetworkOptions& net = {}, const MetricOptions& metrics = {});

struct SymmetryReduction {
  ChartPoint point;
  std::vector<std::size_t> arrows;
  Vector free_mask;  // 1 for free flat coordinates, 0 for the constrained ones

  // Zeroes the off-diagonal entries of each reduced arrow's leading square block.
  Vector project(const Vector& x) const { return x.cwiseProduct(free_mask); }
};

// Arrows usable for the reduction: both ends interior, not loops, and no two
// chosen arrows touching a common vertex. Throws AdjacencyViolation.
void check_reduction_arrows(const Quiver& q, const IOSpec& io, const std::vector<std::size_t>& arrows);
std::vector<std::size_t> eligible_reduction_arrows(const Quiver& q, const IOSpec& io);

// Moves the point by orthogonal changes of basis at the arrows' ends so every
// chosen W_a has a diagonal leading block holding its singular values in
// descending order. Arrows already of that shape are left as they are.
SymmetryReduction symmetry_reduce(const Quiver& q, const DimVectors& dims, const IOSpec& io, const ChartPoint& point,
                                  const std::vector<std::size_t>& arrows);

enum class Termination { StepBudget, GradientTolerance, StepUnderflow };
const char* termination_name(Termination t);

struct TrainReport {
  std::vector<double> loss_trace;       // initial loss, then one per step
  std::vector<double> grad_norm_trace;  // one per gradient evaluation
  double wall_seconds = 0;
  ChartPoint final_point;
  Termination termination = Termination::StepBudget;
  int steps_taken = 0;
  double final_step_size = 0;
};

// Gaussian chart point with entries of standard deviation `scale`.
ChartPoint random_chart_point(const Quiver& q, const DimVectors& dims, Rng& rng, double scale);

// Explicit Euler on the chart (full batch with step halving, or uniform
// minibatch SGD). Starts from `init` or from a seeded Gaussian point.
TrainReport train(const Quiver& q, const DimVectors& dims, const IOSpec& io, const Samples& data,
                  const TrainConfig& cfg, const std::optional<ChartPoint>& init = std::nullopt);

}  // namespace quivernet
