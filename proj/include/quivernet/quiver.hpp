#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace quivernet {

// Unvalidated description, as read from a file or written by hand.
struct ArrowSpec {
  std::string id;
  std::string tail;
  std::string head;
};

struct QuiverSpec {
  std::vector<std::string> vertices;
  std::vector<ArrowSpec> arrows;
};

// Every violation of the quiver invariants; empty means valid.
std::vector<std::string> validate(const QuiverSpec& spec);

struct Arrow {
  std::string id;
  std::size_t tail;
  std::size_t head;
};

// Directed multigraph with dense vertex/arrow indices. Immutable once built.
class Quiver {
 public:
  Quiver() = default;
  // Throws InvalidInput listing every violation.
  static Quiver from_spec(const QuiverSpec& spec);
  // Chain 0 -> 1 -> ... -> (n-1) with vertex ids "1".."n" and arrows "a1".."a(n-1)".
  static Quiver chain(std::size_t n);

  std::size_t num_vertices() const { return vertex_ids_.size(); }
  std::size_t num_arrows() const { return arrows_.size(); }
  const std::string& vertex_id(std::size_t i) const { return vertex_ids_[i]; }
  const std::vector<std::string>& vertex_ids() const { return vertex_ids_; }
  const Arrow& arrow(std::size_t a) const { return arrows_[a]; }
  const std::vector<Arrow>& arrows() const { return arrows_; }
  std::size_t head(std::size_t a) const { return arrows_[a].head; }
  std::size_t tail(std::size_t a) const { return arrows_[a].tail; }
  const std::vector<std::size_t>& arrows_into(std::size_t i) const { return in_[i]; }
  const std::vector<std::size_t>& arrows_out_of(std::size_t i) const { return out_[i]; }

  std::optional<std::size_t> find_vertex(const std::string& id) const;
  std::optional<std::size_t> find_arrow(const std::string& id) const;
  std::size_t vertex_index(const std::string& id) const;  // throws InvalidInput
  std::size_t arrow_index(const std::string& id) const;   // throws InvalidInput

  QuiverSpec to_spec() const;

 private:
  std::vector<std::string> vertex_ids_;
  std::vector<Arrow> arrows_;
  std::vector<std::vector<std::size_t>> in_, out_;
  std::map<std::string, std::size_t> vertex_lookup_, arrow_lookup_;
};

// Dimension vector d and framing vector n, indexed by vertex.
struct DimVectors {
  std::vector<int> d;
  std::vector<int> n;

  // n = d + 1 at every vertex.
  static DimVectors with_bias_framing(std::vector<int> d);
};

// Throws ShapeMismatch unless dims cover every vertex with nonnegative entries.
void check_dims(const Quiver& q, const DimVectors& dims);

// Path starting at `start` following `arrows` in traversal order (first arrow
// leaves `start`). The empty arrow list is the trivial path at `start`.
struct Path {
  std::size_t start = 0;
  std::vector<std::size_t> arrows;

  std::size_t tail() const { return start; }
  std::size_t head(const Quiver& q) const;
  std::size_t length() const { return arrows.size(); }
  bool trivial() const { return arrows.empty(); }
  // e.g. "a2*a1" (head first), "e@3" for trivial.
  std::string label(const Quiver& q) const;

  bool operator==(const Path&) const = default;
};

struct TopologicalOrder {
  bool acyclic = false;
  std::vector<std::size_t> order;  // valid when acyclic
  Path cycle;                      // witness when not acyclic
};

// Kahn's algorithm, ties broken by declaration order.
TopologicalOrder topological_order(const Quiver& q);

// Paths with head i and length <= max_len, ordered by length then
// lexicographically by arrow ids in traversal order.
std::vector<Path> paths_into(const Quiver& q, std::size_t i, std::size_t max_len);

// Simple oriented cycles of length <= max_len, each listed once, rotated to
// start at its smallest vertex index.
std::vector<Path> oriented_cycles(const Quiver& q, std::size_t max_len);

struct AbelianQuiver {
  Quiver quiver;
  DimVectors dims;
  // For each new vertex, (original vertex, copy index p starting at 1).
  std::vector<std::pair<std::size_t, int>> origin;
};

AbelianQuiver abelianize(const Quiver& q, const DimVectors& dims);

}  // namespace quivernet
