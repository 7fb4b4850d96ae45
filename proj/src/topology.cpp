#include "quivernet/topology.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "quivernet/errors.hpp"
#include "quivernet/parallel.hpp"

namespace quivernet {

IntPolynomial::IntPolynomial(std::vector<BigInt> coeffs) : c_(std::move(coeffs)) { trim(); }

IntPolynomial IntPolynomial::one() { return IntPolynomial({BigInt(1)}); }

void IntPolynomial::trim() {
  while (!c_.empty() && c_.back() == 0) c_.pop_back();
}

BigInt IntPolynomial::at_one() const {
  BigInt s = 0;
  for (const auto& x : c_) s += x;
  return s;
}

BigInt IntPolynomial::evaluate(const BigInt& q) const {
  BigInt s = 0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) s = s * q + *it;
  return s;
}

bool IntPolynomial::is_palindromic() const {
  for (std::size_t i = 0, j = c_.size(); i < j; ++i) {
    --j;
    if (c_[i] != c_[j]) return false;
  }
  return true;
}

bool IntPolynomial::nonnegative() const {
  return std::all_of(c_.begin(), c_.end(), [](const BigInt& x) { return x >= 0; });
}

IntPolynomial IntPolynomial::substitute_power(int k) const {
  if (k < 1) fail(ErrorCode::InvalidInput, "substitution power must be positive");
  if (c_.empty()) return {};
  std::vector<BigInt> out((c_.size() - 1) * k + 1);
  for (std::size_t i = 0; i < c_.size(); ++i) out[i * k] = c_[i];
  return IntPolynomial(std::move(out));
}

std::string IntPolynomial::to_string() const {
  if (c_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 0; i < c_.size(); ++i) {
    if (c_[i] == 0) continue;
    if (!first) os << " + ";
    first = false;
    if (i == 0 || c_[i] != 1) os << c_[i];
    if (i >= 1) os << "q";
    if (i >= 2) os << "^" << i;
  }
  return os.str();
}

IntPolynomial operator*(const IntPolynomial& a, const IntPolynomial& b) {
  if (a.is_zero() || b.is_zero()) return {};
  std::vector<BigInt> out(a.c_.size() + b.c_.size() - 1);
  for (std::size_t i = 0; i < a.c_.size(); ++i) {
    if (a.c_[i] == 0) continue;
    for (std::size_t j = 0; j < b.c_.size(); ++j) out[i + j] += a.c_[i] * b.c_[j];
  }
  return IntPolynomial(std::move(out));
}

namespace {

// prod_{i<=k} (1 - q^{n-k+i}) / (1 - q^i); after step i the array holds
// [n-k+i choose i]_q, so the buffer never needs more than degree + n.
template <class Int>
std::vector<Int> gaussian_coefficients(int n, int k) {
  const std::size_t top = static_cast<std::size_t>(k) * (n - k);
  std::vector<Int> c(top + n + 1);
  c[0] = 1;
  std::size_t deg = 0;
  for (int i = 1; i <= k; ++i) {
    const std::size_t a = static_cast<std::size_t>(n - k + i);
    for (std::size_t j = deg + a; j >= a; --j) c[j] -= c[j - a];
    deg += a;
    for (std::size_t j = i; j <= deg; ++j) c[j] += c[j - i];
    deg -= i;
    for (std::size_t j = deg + 1; j <= deg + i; ++j)
      if (c[j] != 0) fail(ErrorCode::NonFinite, "q_binomial: inexact division");
  }
  c.resize(deg + 1);
  return c;
}

template <unsigned Bits>
using Fixed = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<
    Bits, Bits, boost::multiprecision::signed_magnitude, boost::multiprecision::unchecked, void>>;

template <class Int>
IntPolynomial widen(const std::vector<Int>& fixed) {
  return IntPolynomial(std::vector<BigInt>(fixed.begin(), fixed.end()));
}

}  // namespace

IntPolynomial q_binomial(int n, int d) {
  if (n < 0 || d < 0) fail(ErrorCode::InvalidInput, "q_binomial needs nonnegative arguments");
  if (d > n) return {};
  const int k = std::min(d, n - d);
  // Every intermediate value is bounded by binom(n, k) in magnitude, so most
  // sizes fit a fixed-width integer and skip the heap.
  const double bits = (std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) / std::log(2.0) + 8;
  if (bits < 120) return widen(gaussian_coefficients<Fixed<128>>(n, k));
  if (bits < 250) return widen(gaussian_coefficients<Fixed<256>>(n, k));
  if (bits < 380) return widen(gaussian_coefficients<Fixed<384>>(n, k));
  if (bits < 500) return widen(gaussian_coefficients<Fixed<512>>(n, k));
  if (bits < 1000) return widen(gaussian_coefficients<Fixed<1024>>(n, k));
  return IntPolynomial(gaussian_coefficients<BigInt>(n, k));
}

namespace {

void require_acyclic(const Quiver& q) {
  auto order = topological_order(q);
  if (!order.acyclic) fail(ErrorCode::HasCycle, "topology needs a quiver without oriented cycles");
}

// n_i + sum over arrows j -> i (j != i) of d_j.
int grassmannian_ambient(const Quiver& q, const DimVectors& dims, std::size_t i) {
  int total = dims.n[i];
  for (std::size_t a : q.arrows_into(i))
    if (q.tail(a) != i) total += dims.d[q.tail(a)];
  return total;
}

BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

}  // namespace

std::vector<IntPolynomial> poincare_factors(const Quiver& q, const DimVectors& dims) {
  check_dims(q, dims);
  require_acyclic(q);
  std::vector<IntPolynomial> out;
  for (std::size_t i = 0; i < q.num_vertices(); ++i)
    out.push_back(q_binomial(grassmannian_ambient(q, dims, i), dims.d[i]).substitute_power(2));
  return out;
}

IntPolynomial poincare_polynomial(const Quiver& q, const DimVectors& dims) {
  IntPolynomial p = IntPolynomial::one();
  for (const auto& f : poincare_factors(q, dims)) p = p * f;
  return p;
}

BigInt euler_characteristic(const Quiver& q, const DimVectors& dims) {
  check_dims(q, dims);
  require_acyclic(q);
  BigInt chi = 1;
  for (std::size_t i = 0; i < q.num_vertices(); ++i) chi *= binomial(grassmannian_ambient(q, dims, i), dims.d[i]);
  return chi;
}

long long dim_moduli(const Quiver& q, const DimVectors& dims) {
  check_dims(q, dims);
  require_acyclic(q);
  long long total = 0;
  for (std::size_t i = 0; i < q.num_vertices(); ++i)
    total += static_cast<long long>(dims.d[i]) * grassmannian_ambient(q, dims, i);
  return total;
}

const char* chain_name(ChainKind kind) { return kind == ChainKind::A ? "A" : "Aprime"; }

Quiver chain_quiver(ChainKind kind, std::size_t vertices) {
  QuiverSpec spec;
  for (std::size_t i = 0; i < vertices; ++i) spec.vertices.push_back(std::to_string(i));
  for (std::size_t j = 1; j < vertices; ++j) {
    if (kind == ChainKind::A) {
      spec.arrows.push_back({"a" + std::to_string(j - 1), std::to_string(j - 1), std::to_string(j)});
    } else {
      for (std::size_t i = 0; i < j; ++i)
        spec.arrows.push_back({"a" + std::to_string(i) + "_" + std::to_string(j), std::to_string(i), std::to_string(j)});
    }
  }
  return Quiver::from_spec(spec);
}

ChainInvariants chain_invariants(ChainKind kind, const std::vector<int>& d) {
  for (int x : d)
    if (x < 0) fail(ErrorCode::InvalidInput, "dimension vector entries must be nonnegative");
  ChainInvariants out;
  out.chi = 1;
  long long prefix = 0;  // sum_{j <= i} d_j for Aprime, d_i for A
  for (std::size_t v = 0; v < d.size(); ++v) {
    out.chi *= binomial(static_cast<int>(prefix) + d[v] + 1, d[v]);
    out.dim += static_cast<long long>(d[v]) * (prefix + 1);
    prefix = kind == ChainKind::A ? d[v] : prefix + d[v];
  }
  return out;
}

double log_big(const BigInt& x) {
  if (x <= 0) fail(ErrorCode::InvalidInput, "log of a nonpositive integer");
  const std::size_t bits = boost::multiprecision::msb(x) + 1;
  if (bits <= 1000) return std::log(x.convert_to<double>());
  const std::size_t shift = bits - 64;
  BigInt top = x >> shift;
  return std::log(top.convert_to<double>()) + static_cast<double>(shift) * std::log(2.0);
}

std::vector<std::string> parse_pattern(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
    if (tok.empty()) fail(ErrorCode::InvalidInput, "empty entry in dimension pattern '" + text + "'");
    if (tok != "m" && tok.find_first_not_of("0123456789") != std::string::npos)
      fail(ErrorCode::InvalidInput, "dimension pattern entries are integers or 'm': '" + tok + "'");
    out.push_back(tok);
  }
  if (out.empty()) fail(ErrorCode::InvalidInput, "empty dimension pattern");
  return out;
}

std::vector<int> expand_pattern(const std::vector<std::string>& pattern, int m) {
  std::vector<int> d;
  for (const auto& tok : pattern) d.push_back(tok == "m" ? m : std::stoi(tok));
  return d;
}

void FactorCache::build(const std::vector<std::pair<int, int>>& keys) {
  std::vector<std::pair<int, int>> todo;
  for (const auto& key : keys)
    if (!factors_.count(key) && std::find(todo.begin(), todo.end(), key) == todo.end()) todo.push_back(key);
  // largest first so the slow factors start early
  auto work = [](std::pair<int, int> key) { return static_cast<long long>(key.second) * key.second * (key.first - key.second); };
  std::sort(todo.begin(), todo.end(), [&](auto x, auto y) { return work(x) > work(y); });
  std::vector<IntPolynomial> built(todo.size());
  parallel_for(todo.size(), [&](std::size_t t) { built[t] = q_binomial(todo[t].first, todo[t].second); });
  for (std::size_t t = 0; t < todo.size(); ++t) factors_[todo[t]] = std::move(built[t]);
}

const IntPolynomial& FactorCache::get(int n, int k) const {
  auto it = factors_.find({n, k});
  if (it == factors_.end()) fail(ErrorCode::InvalidInput, "factor cache miss");
  return it->second;
}

std::vector<SweepPoint> chi_sweep(ChainKind kind, const std::vector<std::string>& pattern, int m_lo, int m_hi,
                                  const SweepOptions& opts) {
  if (m_lo > m_hi || m_lo < 0) fail(ErrorCode::InvalidInput, "sweep range must satisfy 0 <= lo <= hi");
  const std::size_t count = static_cast<std::size_t>(m_hi - m_lo + 1);
  std::vector<SweepPoint> out(count);
  Quiver q = chain_quiver(kind, pattern.size());

  std::vector<std::vector<std::pair<int, int>>> keys(count);
  std::vector<std::pair<int, int>> all_keys;
  for (std::size_t s = 0; s < count; ++s) {
    SweepPoint& p = out[s];
    p.kind = kind;
    p.m = m_lo + static_cast<int>(s);
    p.d = expand_pattern(pattern, p.m);
    auto inv = chain_invariants(kind, p.d);
    p.chi = inv.chi;
    p.dim = inv.dim;
    p.log_chi = log_big(p.chi);
    auto dims = DimVectors::with_bias_framing(p.d);
    for (std::size_t i = 0; i < q.num_vertices(); ++i) {
      int n = grassmannian_ambient(q, dims, i), k = std::min(p.d[i], n - p.d[i]);
      keys[s].push_back({n, k});
      all_keys.push_back({n, k});
    }
  }
  if (!opts.verify) return out;

  FactorCache local;
  FactorCache& cache = opts.cache ? *opts.cache : local;
  cache.build(all_keys);

  for (std::size_t s = 0; s < count; ++s) {
    BigInt product = 1;
    bool palindromic = true;
    for (const auto& key : keys[s]) {
      const IntPolynomial& f = cache.get(key.first, key.second);
      product *= f.at_one();
      palindromic = palindromic && f.is_palindromic() && f.nonnegative();
    }
    out[s].chi_matches_poincare = product == out[s].chi;
    out[s].palindromic = palindromic;
  }
  return out;
}

namespace {

std::optional<double> nearest_in_range(const std::vector<SweepPoint>& pts, long long dim) {
  if (pts.empty()) return std::nullopt;
  long long lo = pts.front().dim, hi = pts.front().dim;
  for (const auto& p : pts) {
    lo = std::min(lo, p.dim);
    hi = std::max(hi, p.dim);
  }
  if (dim < lo || dim > hi) return std::nullopt;
  const SweepPoint* best = &pts.front();
  for (const auto& p : pts)
    if (std::llabs(p.dim - dim) < std::llabs(best->dim - dim)) best = &p;
  return best->log_chi;
}

}  // namespace

std::vector<ChiRow> emit_chi_plot(const std::vector<SweepPoint>& a, const std::vector<SweepPoint>& aprime) {
  std::vector<ChiRow> rows;
  for (const auto& p : a) rows.push_back({p.dim, p.log_chi, nearest_in_range(aprime, p.dim)});
  for (const auto& p : aprime) rows.push_back({p.dim, nearest_in_range(a, p.dim), p.log_chi});
  std::stable_sort(rows.begin(), rows.end(), [](const ChiRow& x, const ChiRow& y) { return x.dim < y.dim; });
  return rows;
}

std::string chi_csv(const std::vector<ChiRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "D,logchi_A,logchi_Aprime\n";
  for (const auto& r : rows) {
    os << r.dim << ",";
    if (r.log_chi_a) os << *r.log_chi_a;
    os << ",";
    if (r.log_chi_aprime) os << *r.log_chi_aprime;
    os << "\n";
  }
  return os.str();
}

}  // namespace quivernet
