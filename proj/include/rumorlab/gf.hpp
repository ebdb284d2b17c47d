#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rumorlab {

// Primality by trial division. Intended range is small moduli (≤ 2^20 or so);
// still correct for any uint64 input, just slow for huge ones.
inline bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  if (n % 2 == 0) return n == 2;
  if (n % 3 == 0) return n == 3;
  for (std::uint64_t d = 5; d * d <= n; d += 6) {
    if (n % d == 0 || n % (d + 2) == 0) return false;
  }
  return true;
}

inline std::uint64_t next_prime_at_least(std::uint64_t n) {
  if (n < 2) return 2;
  while (!is_prime_u64(n)) ++n;
  return n;
}

// Element of the prime field F_q. The modulus travels with the value and is
// certified prime at construction.
class FieldElement {
 public:
  FieldElement(std::uint64_t value, std::uint64_t q) : value_(value), q_(q) {
    if (!is_prime_u64(q)) throw std::invalid_argument("modulus is not prime");
    if (value >= q) throw std::out_of_range("field value out of range");
  }

  std::uint64_t value() const { return value_; }
  std::uint64_t modulus() const { return q_; }

  bool operator==(const FieldElement& o) const {
    return value_ == o.value_ && q_ == o.q_;
  }
  bool operator!=(const FieldElement& o) const { return !(*this == o); }

 private:
  std::uint64_t value_, q_;
};

enum class FieldOpKind { add, mul, inv_of_a };

namespace detail {

inline void require_same_modulus(const FieldElement& a, const FieldElement& b) {
  if (a.modulus() != b.modulus())
    throw std::invalid_argument("field modulus mismatch");
}

// a^e mod q. Products stay below 2^128 via __int128; moduli here are far
// below 2^63 anyway.
inline std::uint64_t pow_mod(std::uint64_t a, std::uint64_t e, std::uint64_t q) {
  unsigned __int128 acc = 1, base = a % q;
  while (e) {
    if (e & 1) acc = acc * base % q;
    base = base * base % q;
    e >>= 1;
  }
  return std::uint64_t(acc);
}

}  // namespace detail

inline FieldElement field_op(const FieldElement& a, const FieldElement& b,
                             FieldOpKind kind) {
  detail::require_same_modulus(a, b);
  const std::uint64_t q = a.modulus();
  switch (kind) {
    case FieldOpKind::add:
      return FieldElement((a.value() + b.value()) % q, q);
    case FieldOpKind::mul:
      return FieldElement(
          std::uint64_t((unsigned __int128)a.value() * b.value() % q), q);
    case FieldOpKind::inv_of_a:
      if (a.value() == 0) throw std::domain_error("inverse of zero");
      return FieldElement(detail::pow_mod(a.value(), q - 2, q), q);
  }
  throw std::invalid_argument("unknown field op");
}

// Polynomial over F_q, coefficients low-degree first, at most bound+1 of them.
class Poly {
 public:
  Poly(std::vector<FieldElement> coeffs, std::size_t degree_bound)
      : coeffs_(std::move(coeffs)), bound_(degree_bound) {
    if (coeffs_.empty()) throw std::invalid_argument("empty coefficient list");
    if (coeffs_.size() > bound_ + 1)
      throw std::invalid_argument("too many coefficients for degree bound");
    for (const auto& c : coeffs_) detail::require_same_modulus(c, coeffs_[0]);
  }

  const std::vector<FieldElement>& coeffs() const { return coeffs_; }
  std::size_t degree_bound() const { return bound_; }
  std::uint64_t modulus() const { return coeffs_[0].modulus(); }

 private:
  std::vector<FieldElement> coeffs_;
  std::size_t bound_;
};

inline FieldElement poly_eval(const Poly& p, const FieldElement& x) {
  detail::require_same_modulus(p.coeffs()[0], x);
  const std::uint64_t q = x.modulus();
  unsigned __int128 acc = 0;
  for (std::size_t i = p.coeffs().size(); i-- > 0;) {
    acc = (acc * x.value() + p.coeffs()[i].value()) % q;
  }
  return FieldElement(std::uint64_t(acc), q);
}

// Base-q digits of u as coefficients; injective on [q^(bound+1)].
inline Poly id_to_poly(std::uint64_t u, std::uint64_t q, std::size_t degree_bound) {
  // Capacity check without overflow: cap = q^(bound+1), clamped.
  unsigned __int128 cap = 1;
  for (std::size_t i = 0; i <= degree_bound && cap <= (unsigned __int128)UINT64_MAX;
       ++i)
    cap *= q;
  if ((unsigned __int128)u >= cap) throw std::out_of_range("id exceeds q^(t+1)");
  std::vector<FieldElement> coeffs;
  coeffs.reserve(degree_bound + 1);
  for (std::size_t i = 0; i <= degree_bound; ++i) {
    coeffs.emplace_back(u % q, q);
    u /= q;
  }
  return Poly(std::move(coeffs), degree_bound);
}

}  // namespace rumorlab
