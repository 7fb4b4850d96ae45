#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "quivernet/quiver.hpp"

namespace quivernet {

using BigInt = boost::multiprecision::cpp_int;

// Integer polynomial in q, ascending coefficients, no trailing zeros.
class IntPolynomial {
 public:
  IntPolynomial() = default;  // the zero polynomial
  explicit IntPolynomial(std::vector<BigInt> coeffs);
  static IntPolynomial one();

  const std::vector<BigInt>& coefficients() const { return c_; }
  int degree() const { return static_cast<int>(c_.size()) - 1; }  // -1 for zero
  bool is_zero() const { return c_.empty(); }

  BigInt at_one() const;
  BigInt evaluate(const BigInt& q) const;
  bool is_palindromic() const;
  bool nonnegative() const;
  IntPolynomial substitute_power(int k) const;  // q -> q^k

  std::string to_string() const;

  friend IntPolynomial operator*(const IntPolynomial& a, const IntPolynomial& b);
  friend bool operator==(const IntPolynomial& a, const IntPolynomial& b) { return a.c_ == b.c_; }

 private:
  std::vector<BigInt> c_;
  void trim();
};

// Gaussian binomial [n choose d]_q; the zero polynomial when d > n.
IntPolynomial q_binomial(int n, int d);

// Per-vertex Grassmannian factors [n_i + sum_{j->i} d_j choose d_i]_{q^2}.
// Throws HasCycle.
std::vector<IntPolynomial> poincare_factors(const Quiver& q, const DimVectors& dims);
IntPolynomial poincare_polynomial(const Quiver& q, const DimVectors& dims);

// Product of the ordinary binomials, i.e. the Poincare polynomial at q = 1.
BigInt euler_characteristic(const Quiver& q, const DimVectors& dims);

// sum_i d_i (n_i + sum_{j->i, j != i} d_j).
long long dim_moduli(const Quiver& q, const DimVectors& dims);

enum class ChainKind { A, Aprime };

const char* chain_name(ChainKind kind);

// A: arrows i -> i+1. Aprime: an arrow i -> j for every i < j.
Quiver chain_quiver(ChainKind kind, std::size_t vertices);

struct ChainInvariants {
  BigInt chi;
  long long dim = 0;  // moduli dimension (parameter count)
};

// Closed forms for n = d + 1, d listed over all k+2 vertices.
ChainInvariants chain_invariants(ChainKind kind, const std::vector<int>& d);

// Natural log of a positive big integer, rounded to double at the end.
double log_big(const BigInt& x);

// "600,m,m,m,10" with m replaced.
std::vector<int> expand_pattern(const std::vector<std::string>& pattern, int m);
std::vector<std::string> parse_pattern(const std::string& text);

struct SweepPoint {
  ChainKind kind = ChainKind::A;
  int m = 0;
  std::vector<int> d;
  long long dim = 0;
  BigInt chi;
  double log_chi = 0;
  bool chi_matches_poincare = false;  // closed form == product of factors at q = 1
  bool palindromic = false;           // every Grassmannian factor palindromic and nonnegative
};

// Memo of q-binomial factors keyed by (n, min(d, n-d)); one cache can be
// shared by several sweeps.
class FactorCache {
 public:
  // Builds every missing key (in parallel) and keeps the results.
  void build(const std::vector<std::pair<int, int>>& keys);
  const IntPolynomial& get(int n, int k) const;
  std::size_t size() const { return factors_.size(); }

 private:
  std::map<std::pair<int, int>, IntPolynomial> factors_;
};

struct SweepOptions {
  bool verify = true;           // build the q-binomial factors exactly
  FactorCache* cache = nullptr;  // optional shared memo
};

std::vector<SweepPoint> chi_sweep(ChainKind kind, const std::vector<std::string>& pattern, int m_lo, int m_hi,
                                  const SweepOptions& opts = {});

struct ChiRow {
  long long dim = 0;
  std::optional<double> log_chi_a;
  std::optional<double> log_chi_aprime;
};

// One row per sweep point, sorted by dimension. The other kind's column holds
// its nearest-dimension value when the row lies inside that kind's dimension
// range and is empty otherwise.
std::vector<ChiRow> emit_chi_plot(const std::vector<SweepPoint>& a, const std::vector<SweepPoint>& aprime);

std::string chi_csv(const std::vector<ChiRow>& rows);

}  // namespace quivernet
