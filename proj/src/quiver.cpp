#include "quivernet/quiver.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "quivernet/errors.hpp"

namespace quivernet {

std::vector<std::string> validate(const QuiverSpec& spec) {
  std::vector<std::string> errors;
  std::set<std::string> vertices;
  for (const auto& v : spec.vertices) {
    if (!vertices.insert(v).second) errors.push_back("duplicate vertex id '" + v + "'");
  }
  std::set<std::string> arrow_ids;
  for (const auto& a : spec.arrows) {
    if (!arrow_ids.insert(a.id).second) errors.push_back("duplicate arrow id '" + a.id + "'");
    if (!vertices.count(a.tail))
      errors.push_back("arrow '" + a.id + "': unknown vertex '" + a.tail + "' (tail)");
    if (!vertices.count(a.head))
      errors.push_back("arrow '" + a.id + "': unknown vertex '" + a.head + "' (head)");
  }
  return errors;
}

Quiver Quiver::from_spec(const QuiverSpec& spec) {
  auto errors = validate(spec);
  if (!errors.empty()) {
    std::string msg;
    for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e;
    fail(ErrorCode::InvalidInput, msg);
  }
  Quiver q;
  q.vertex_ids_ = spec.vertices;
  for (std::size_t i = 0; i < spec.vertices.size(); ++i) q.vertex_lookup_[spec.vertices[i]] = i;
  q.in_.resize(spec.vertices.size());
  q.out_.resize(spec.vertices.size());
  for (const auto& a : spec.arrows) {
    std::size_t idx = q.arrows_.size();
    Arrow arrow{a.id, q.vertex_lookup_.at(a.tail), q.vertex_lookup_.at(a.head)};
    q.arrows_.push_back(arrow);
    q.arrow_lookup_[a.id] = idx;
    q.out_[arrow.tail].push_back(idx);
    q.in_[arrow.head].push_back(idx);
  }
  return q;
}

Quiver Quiver::chain(std::size_t n) {
  QuiverSpec spec;
  for (std::size_t i = 1; i <= n; ++i) spec.vertices.push_back(std::to_string(i));
  for (std::size_t i = 1; i < n; ++i)
    spec.arrows.push_back({"a" + std::to_string(i), std::to_string(i), std::to_string(i + 1)});
  return from_spec(spec);
}

std::optional<std::size_t> Quiver::find_vertex(const std::string& id) const {
  auto it = vertex_lookup_.find(id);
  if (it == vertex_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Quiver::find_arrow(const std::string& id) const {
  auto it = arrow_lookup_.find(id);
  if (it == arrow_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t Quiver::vertex_index(const std::string& id) const {
  auto v = find_vertex(id);
  if (!v) fail(ErrorCode::InvalidInput, "unknown vertex '" + id + "'");
  return *v;
}

std::size_t Quiver::arrow_index(const std::string& id) const {
  auto a = find_arrow(id);
  if (!a) fail(ErrorCode::InvalidInput, "unknown arrow '" + id + "'");
  return *a;
}

QuiverSpec Quiver::to_spec() const {
  QuiverSpec spec;
  spec.vertices = vertex_ids_;
  for (const auto& a : arrows_) spec.arrows.push_back({a.id, vertex_ids_[a.tail], vertex_ids_[a.head]});
  return spec;
}

DimVectors DimVectors::with_bias_framing(std::vector<int> d) {
  DimVectors dims;
  dims.n.reserve(d.size());
  for (int di : d) dims.n.push_back(di + 1);
  dims.d = std::move(d);
  return dims;
}

void check_dims(const Quiver& q, const DimVectors& dims) {
  if (dims.d.size() != q.num_vertices() || dims.n.size() != q.num_vertices())
    fail(ErrorCode::ShapeMismatch, "dimension vectors must cover every vertex");
  for (std::size_t i = 0; i < q.num_vertices(); ++i)
    if (dims.d[i] < 0 || dims.n[i] < 0)
      fail(ErrorCode::ShapeMismatch, "negative dimension at vertex '" + q.vertex_id(i) + "'");
}

std::size_t Path::head(const Quiver& q) const {
  return arrows.empty() ? start : q.head(arrows.back());
}

std::string Path::label(const Quiver& q) const {
  if (arrows.empty()) return "e@" + q.vertex_id(start);
  std::string s;
  for (auto it = arrows.rbegin(); it != arrows.rend(); ++it) {
    if (!s.empty()) s += "*";
    s += q.arrow(*it).id;
  }
  return s;
}

namespace {

// Walk backwards along incoming arrows inside `alive` until a vertex repeats.
Path find_cycle(const Quiver& q, const std::vector<bool>& alive) {
  std::size_t v = 0;
  while (!alive[v]) ++v;
  std::vector<int> seen_at(q.num_vertices(), -1);
  std::vector<std::size_t> back_arrows;  // arrows walked backwards
  std::vector<std::size_t> visited;
  while (seen_at[v] < 0) {
    seen_at[v] = static_cast<int>(visited.size());
    visited.push_back(v);
    std::size_t chosen = q.num_arrows();
    for (std::size_t a : q.arrows_into(v))
      if (alive[q.tail(a)]) {
        chosen = a;
        break;
      }
    back_arrows.push_back(chosen);
    v = q.tail(chosen);
  }
  // back_arrows[k] enters visited[k]; the cycle is visited[seen_at[v]..] reversed.
  Path cycle;
  cycle.start = v;
  std::vector<std::size_t> arrows(back_arrows.begin() + seen_at[v], back_arrows.end());
  std::reverse(arrows.begin(), arrows.end());
  cycle.arrows = arrows;
  return cycle;
}

}  // namespace

TopologicalOrder topological_order(const Quiver& q) {
  const std::size_t nv = q.num_vertices();
  std::vector<std::size_t> indeg(nv, 0);
  for (const auto& a : q.arrows()) ++indeg[a.head];
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < nv; ++i)
    if (indeg[i] == 0) ready.insert(i);
  TopologicalOrder result;
  std::vector<bool> alive(nv, true);
  while (!ready.empty()) {
    std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    alive[v] = false;
    result.order.push_back(v);
    for (std::size_t a : q.arrows_out_of(v))
      if (--indeg[q.head(a)] == 0) ready.insert(q.head(a));
  }
  result.acyclic = result.order.size() == nv;
  if (!result.acyclic) {
    result.cycle = find_cycle(q, alive);
    result.order.clear();
  }
  return result;
}

std::vector<Path> paths_into(const Quiver& q, std::size_t i, std::size_t max_len) {
  std::vector<Path> all;
  std::vector<Path> layer{Path{i, {}}};
  auto id_key = [&q](const Path& p) {
    std::vector<std::string> key;
    for (std::size_t a : p.arrows) key.push_back(q.arrow(a).id);
    return key;
  };
  for (std::size_t len = 0;; ++len) {
    std::sort(layer.begin(), layer.end(),
              [&](const Path& x, const Path& y) { return id_key(x) < id_key(y); });
    all.insert(all.end(), layer.begin(), layer.end());
    if (len == max_len || layer.empty()) break;
    std::vector<Path> next;
    for (const Path& p : layer)
      for (std::size_t a : q.arrows_into(p.start)) {
        Path ext{q.tail(a), {a}};
        ext.arrows.insert(ext.arrows.end(), p.arrows.begin(), p.arrows.end());
        next.push_back(std::move(ext));
      }
    layer = std::move(next);
  }
  return all;
}

std::vector<Path> oriented_cycles(const Quiver& q, std::size_t max_len) {
  std::vector<Path> cycles;
  const std::size_t nv = q.num_vertices();
  for (std::size_t s = 0; s < nv; ++s) {
    std::vector<bool> on_stack(nv, false);
    std::vector<std::size_t> stack;
    std::function<void(std::size_t)> dfs = [&](std::size_t v) {
      if (stack.size() >= max_len) return;
      for (std::size_t a : q.arrows_out_of(v)) {
        std::size_t w = q.head(a);
        if (w == s) {
          stack.push_back(a);
          cycles.push_back(Path{s, stack});
          stack.pop_back();
        } else if (w > s && !on_stack[w]) {
          on_stack[w] = true;
          stack.push_back(a);
          dfs(w);
          stack.pop_back();
          on_stack[w] = false;
        }
      }
    };
    on_stack[s] = true;
    dfs(s);
  }
  return cycles;
}

AbelianQuiver abelianize(const Quiver& q, const DimVectors& dims) {
  check_dims(q, dims);
  QuiverSpec spec;
  AbelianQuiver out;
  auto copy_id = [&](std::size_t i, int p) {
    return "(" + q.vertex_id(i) + "," + std::to_string(p) + ")";
  };
  for (std::size_t i = 0; i < q.num_vertices(); ++i)
    for (int p = 1; p <= dims.d[i]; ++p) {
      spec.vertices.push_back(copy_id(i, p));
      out.origin.emplace_back(i, p);
      out.dims.d.push_back(1);
      out.dims.n.push_back(dims.n[i]);
    }
  for (const auto& a : q.arrows())
    for (int p = 1; p <= dims.d[a.tail]; ++p)
      for (int r = 1; r <= dims.d[a.head]; ++r)
        spec.arrows.push_back({a.id + "(" + std::to_string(p) + "," + std::to_string(r) + ")",
                               copy_id(a.tail, p), copy_id(a.head, r)});
  out.quiver = Quiver::from_spec(spec);
  return out;
}

}  // namespace quivernet
