#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "ising/errors.hpp"

namespace ising {

using Bits = boost::dynamic_bitset<std::uint64_t>;

/// Largest N whose configurations can be addressed by a 64-bit state index.
inline constexpr std::size_t kMaxIndexedSites = 64;

/// A maximal run of consecutive ring sites. `start` is 1-based; the arc
/// covers start, start+1, ..., start+length-1 (mod N).
struct Arc {
  std::size_t start = 1;
  std::size_t length = 0;

  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Spin configuration on the periodic ring, bit-packed: bit k set means the
/// spin at 0-based index k is +1. For N <= 64 the packed word doubles as the
/// state index, so index() enumerates {-1,+1}^N in binary order.
///
/// Accessors come in two flavours: operator[] takes a 0-based index and is
/// unchecked, spin() takes a 1-based site and is checked.
class Configuration {
 public:
  explicit Configuration(Bits plus_bits) : bits_(std::move(plus_bits)) {
    if (bits_.size() < 2) throw ArgumentError("configuration needs at least 2 sites");
  }

  static Configuration all_plus(std::size_t n) {
    check_size(n);
    Bits b(n);
    b.set();
    return Configuration(std::move(b));
  }

  static Configuration all_minus(std::size_t n) {
    check_size(n);
    return Configuration(Bits(n));
  }

  static Configuration from_index(std::size_t n, std::uint64_t index) {
    check_size(n);
    if (n > kMaxIndexedSites) throw ResourceError("state index requires N <= 64");
    if (n < 64 && (index >> n) != 0) throw ArgumentError("state index out of range");
    Bits b(n);
    for (std::size_t k = 0; k < n; ++k) b[k] = (index >> k) & 1U;
    return Configuration(std::move(b));
  }

  static Configuration from_spins(std::span<const int> spins) {
    check_size(spins.size());
    Bits b(spins.size());
    for (std::size_t k = 0; k < spins.size(); ++k) {
      if (spins[k] == 1) {
        b[k] = true;
      } else if (spins[k] != -1) {
        throw ArgumentError("spins must be -1 or +1");
      }
    }
    return Configuration(std::move(b));
  }

  /// Parses "+-+-" (site 1 first).
  static Configuration parse(std::string_view text) {
    check_size(text.size());
    Bits b(text.size());
    for (std::size_t k = 0; k < text.size(); ++k) {
      if (text[k] == '+') {
        b[k] = true;
      } else if (text[k] != '-') {
        throw ArgumentError("configuration string may only contain '+' and '-'");
      }
    }
    return Configuration(std::move(b));
  }

  std::size_t n() const { return bits_.size(); }

  int operator[](std::size_t k) const { return bits_[k] ? 1 : -1; }
  bool is_plus(std::size_t k) const { return bits_[k]; }

  int spin(std::size_t site) const {
    if (site < 1 || site > n()) throw ArgumentError("site out of range");
    return (*this)[site - 1];
  }

  std::uint64_t index() const {
    if (n() > kMaxIndexedSites) throw ResourceError("state index requires N <= 64");
    std::uint64_t idx = 0;
    for (std::size_t k = 0; k < n(); ++k) idx |= static_cast<std::uint64_t>(bits_[k]) << k;
    return idx;
  }

  void flip(std::size_t k) { bits_.flip(k); }

  /// sigma^A: every site in `mask` flipped.
  Configuration flipped(const Bits& mask) const {
    if (mask.size() != n()) throw ArgumentError("flip mask size mismatch");
    return Configuration(bits_ ^ mask);
  }

  void flip_all(const Bits& mask) { bits_ ^= mask; }

  Configuration operator-() const { return Configuration(~bits_); }

  bool is_all_plus() const { return bits_.all(); }
  bool is_all_minus() const { return bits_.none(); }
  bool is_aligned() const { return is_all_plus() || is_all_minus(); }

  std::size_t plus_count() const { return bits_.count(); }
  long magnetization() const {
    return 2 * static_cast<long>(plus_count()) - static_cast<long>(n());
  }

  const Bits& plus_bits() const { return bits_; }

  std::vector<int> spins() const {
    std::vector<int> out(n());
    for (std::size_t k = 0; k < n(); ++k) out[k] = (*this)[k];
    return out;
  }

  std::string to_string() const {
    std::string s(n(), '-');
    for (std::size_t k = 0; k < n(); ++k)
      if (bits_[k]) s[k] = '+';
    return s;
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.bits_ == b.bits_;
  }

 private:
  static void check_size(std::size_t n) {
    if (n < 2) throw ArgumentError("configuration needs at least 2 sites");
  }

  Bits bits_;
};

/// Subset A of [N] to be flipped, stored as a bitmask over 0-based indices.
class FlipSet {
 public:
  explicit FlipSet(Bits mask) : mask_(std::move(mask)) {}

  static FlipSet empty(std::size_t n) { return FlipSet(Bits(n)); }

  static FlipSet full(std::size_t n) {
    Bits b(n);
    b.set();
    return FlipSet(std::move(b));
  }

  /// 1-based site list.
  static FlipSet from_sites(std::size_t n, std::initializer_list<std::size_t> sites) {
    return from_sites(n, std::span<const std::size_t>(sites.begin(), sites.size()));
  }

  static FlipSet from_sites(std::size_t n, std::span<const std::size_t> sites) {
    Bits b(n);
    for (std::size_t s : sites) {
      if (s < 1 || s > n) throw ArgumentError("site out of range");
      b[s - 1] = true;
    }
    return FlipSet(std::move(b));
  }

  static FlipSet from_arc(std::size_t n, Arc arc) {
    if (arc.start < 1 || arc.start > n || arc.length > n) throw ArgumentError("arc out of range");
    Bits b(n);
    for (std::size_t t = 0; t < arc.length; ++t) b[(arc.start - 1 + t) % n] = true;
    return FlipSet(std::move(b));
  }

  std::size_t n() const { return mask_.size(); }
  std::size_t size() const { return mask_.count(); }
  bool is_empty() const { return mask_.none(); }
  bool is_full() const { return mask_.all(); }
  bool contains_index(std::size_t k) const { return mask_[k]; }
  bool contains(std::size_t site) const {
    if (site < 1 || site > n()) throw ArgumentError("site out of range");
    return mask_[site - 1];
  }

  const Bits& mask() const { return mask_; }

  std::vector<std::size_t> sites() const {
    std::vector<std::size_t> out;
    for (std::size_t k = mask_.find_first(); k != Bits::npos; k = mask_.find_next(k))
      out.push_back(k + 1);
    return out;
  }

  /// The arc witness: set when the set is a nonempty interval mod N or the
  /// full ring (start = 1 for the full ring).
  std::optional<Arc> arc() const {
    const std::size_t count = size();
    if (count == 0) return std::nullopt;
    const std::size_t nn = n();
    if (count == nn) return Arc{1, nn};
    std::optional<std::size_t> start;
    for (std::size_t k = 0; k < nn; ++k) {
      if (mask_[k] && !mask_[(k + nn - 1) % nn]) {
        if (start) return std::nullopt;
        start = k;
      }
    }
    return Arc{*start + 1, count};
  }

  friend bool operator==(const FlipSet& a, const FlipSet& b) { return a.mask_ == b.mask_; }

 private:
  Bits mask_;
};

}  // namespace ising
