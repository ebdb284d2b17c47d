#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rumorlab {

// Arbitrary-size unsigned integer, little-endian 64-bit limbs, normalized to
// no trailing zero limbs. Just the operations exact dyadic averaging needs:
// values are kept as num / 2^e with a shared exponent, and one averaging
// round is add-and-bump-exponent, so no division ever happens.
class BigUint {
 public:
  BigUint() = default;
  explicit BigUint(std::uint64_t v) {
    if (v) limbs_.push_back(v);
  }

  bool is_zero() const { return limbs_.empty(); }

  static BigUint add(const BigUint& a, const BigUint& b) {
    BigUint out;
    const std::size_t n = std::max(a.limbs_.size(), b.limbs_.size());
    out.limbs_.resize(n, 0);
    unsigned __int128 carry = 0;
    for (std::size_t i = 0; i < n; ++i) {
      unsigned __int128 s = carry;
      if (i < a.limbs_.size()) s += a.limbs_[i];
      if (i < b.limbs_.size()) s += b.limbs_[i];
      out.limbs_[i] = std::uint64_t(s);
      carry = s >> 64;
    }
    if (carry) out.limbs_.push_back(std::uint64_t(carry));
    return out;
  }

  // Multiply by 2^k in place.
  void shl(unsigned k) {
    if (is_zero() || k == 0) return;
    const unsigned words = k / 64, bits = k % 64;
    const std::size_t old = limbs_.size();
    limbs_.resize(old + words + (bits ? 1 : 0), 0);
    for (std::size_t i = old; i-- > 0;) {
      std::uint64_t hi = bits ? (limbs_[i] >> (64 - bits)) : 0;
      if (bits && hi) limbs_[i + words + 1] |= hi;
      limbs_[i + words] = bits ? (limbs_[i] << bits) : limbs_[i];
    }
    for (unsigned i = 0; i < words; ++i) limbs_[i] = 0;
    normalize();
  }

  int compare(const BigUint& o) const {
    if (limbs_.size() != o.limbs_.size())
      return limbs_.size() < o.limbs_.size() ? -1 : 1;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
      if (limbs_[i] != o.limbs_[i]) return limbs_[i] < o.limbs_[i] ? -1 : 1;
    }
    return 0;
  }

  bool operator==(const BigUint& o) const { return limbs_ == o.limbs_; }
  bool operator!=(const BigUint& o) const { return limbs_ != o.limbs_; }

  // Value of (this) * 2^exp2 as a double. Only the top 192 bits of the
  // integer are read (the rest is below double precision), so huge operands
  // never overflow the intermediate.
  double to_double_scaled(long exp2) const {
    if (is_zero()) return 0.0;
    const std::size_t n = limbs_.size();
    const std::size_t take = n < 3 ? n : 3;
    double acc = 0.0;
    for (std::size_t i = n; i-- > n - take;)
      acc = std::ldexp(acc, 64) + double(limbs_[i]);
    return std::ldexp(acc, exp2 + 64 * long(n - take));
  }

  std::size_t bit_length() const {
    if (is_zero()) return 0;
    std::uint64_t top = limbs_.back();
    std::size_t b = 0;
    while (top) { top >>= 1; ++b; }
    return 64 * (limbs_.size() - 1) + b;
  }

 private:
  void normalize() {
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
  }
  std::vector<std::uint64_t> limbs_;
};

// One vector of exact dyadic rationals num[i] / 2^exp, sharing the exponent.
struct DyadicVec {
  std::vector<BigUint> num;
  unsigned exp = 0;

  static DyadicVec point_mass(std::size_t n, std::size_t at) {
    DyadicVec v;
    v.num.assign(n, BigUint());
    v.num.at(at) = BigUint(1);
    return v;
  }

  double value(std::size_t i) const { return num[i].to_double_scaled(-long(exp)); }

  // Exact sum == 1 check (conservation).
  bool sums_to_one() const {
    BigUint s;
    for (const auto& x : num) s = BigUint::add(s, x);
    BigUint one(1);
    one.shl(exp);
    return s == one;
  }

  bool equals(const DyadicVec& o) const {
    if (num.size() != o.num.size()) return false;
    const unsigned e = std::max(exp, o.exp);
    for (std::size_t i = 0; i < num.size(); ++i) {
      BigUint a = num[i], b = o.num[i];
      a.shl(e - exp);
      b.shl(e - o.exp);
      if (a != b) return false;
    }
    return true;
  }
};

}  // namespace rumorlab
