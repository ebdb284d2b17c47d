#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rumorlab/rng.hpp"

namespace rumorlab {

// Fixed-length bit string, bit 0 first. Seeds and generator outputs can be
// longer than 64 bits, so everything that moves seeds around uses this.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t nbits) : n_(nbits), w_((nbits + 63) / 64, 0) {}

  static BitVec from_u64(std::uint64_t v, std::size_t nbits) {
    if (nbits < 64 && nbits > 0 && (v >> nbits) != 0)
      throw std::invalid_argument("from_u64: value does not fit");
    if (nbits == 0 && v != 0) throw std::invalid_argument("from_u64: value does not fit");
    BitVec b(nbits);
    if (nbits > 0) b.w_[0] = v;
    return b;
  }

  static BitVec random(Rng& rng, std::size_t nbits) {
    BitVec b(nbits);
    for (auto& w : b.w_) w = rng.next_u64();
    b.mask_top();
    return b;
  }

  std::size_t size() const { return n_; }

  bool get(std::size_t i) const {
    check(i);
    return (w_[i >> 6] >> (i & 63)) & 1;
  }

  void set(std::size_t i, bool v) {
    check(i);
    const std::uint64_t m = std::uint64_t(1) << (i & 63);
    if (v) w_[i >> 6] |= m; else w_[i >> 6] &= ~m;
  }

  void flip(std::size_t i) {
    check(i);
    w_[i >> 6] ^= std::uint64_t(1) << (i & 63);
  }

  // Bits [pos, pos+len) as an integer, len <= 64.
  std::uint64_t u64_at(std::size_t pos, std::size_t len) const {
    if (len > 64) throw std::invalid_argument("u64_at: len > 64");
    if (pos + len > n_) throw std::out_of_range("u64_at: range outside bit string");
    if (len == 0) return 0;
    const std::size_t word = pos >> 6, off = pos & 63;
    std::uint64_t v = w_[word] >> off;
    if (off + len > 64) v |= w_[word + 1] << (64 - off);
    return len == 64 ? v : (v & ((std::uint64_t(1) << len) - 1));
  }

  void set_u64(std::size_t pos, std::size_t len, std::uint64_t v) {
    if (len > 64) throw std::invalid_argument("set_u64: len > 64");
    if (pos + len > n_) throw std::out_of_range("set_u64: range outside bit string");
    for (std::size_t i = 0; i < len; ++i) set(pos + i, (v >> i) & 1);
  }

  BitVec slice(std::size_t pos, std::size_t len) const {
    if (pos + len > n_) throw std::out_of_range("slice: range outside bit string");
    BitVec out(len);
    std::size_t i = 0;
    for (; i + 64 <= len; i += 64) out.w_[i >> 6] = u64_at(pos + i, 64);
    if (i < len) out.set_u64(i, len - i, u64_at(pos + i, len - i));
    return out;
  }

  void append(const BitVec& other) {
    const std::size_t old = n_;
    n_ += other.n_;
    w_.resize((n_ + 63) / 64, 0);
    std::size_t i = 0;
    for (; i + 64 <= other.n_; i += 64) set_u64(old + i, 64, other.u64_at(i, 64));
    if (i < other.n_) set_u64(old + i, other.n_ - i, other.u64_at(i, other.n_ - i));
  }

  std::uint64_t to_u64() const {
    if (n_ > 64) throw std::invalid_argument("to_u64: more than 64 bits");
    return n_ == 0 ? 0 : w_[0];
  }

  bool operator==(const BitVec& o) const { return n_ == o.n_ && w_ == o.w_; }
  bool operator!=(const BitVec& o) const { return !(*this == o); }

  // Bit 0 leftmost; debugging aid.
  std::string to_string() const {
    std::string s;
    s.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) s.push_back(get(i) ? '1' : '0');
    return s;
  }

 private:
  void check(std::size_t i) const {
    if (i >= n_) throw std::out_of_range("BitVec index out of range");
  }
  void mask_top() {
    if (n_ & 63) w_.back() &= (std::uint64_t(1) << (n_ & 63)) - 1;
  }
  std::size_t n_ = 0;
  std::vector<std::uint64_t> w_;
};

}  // namespace rumorlab
