#pragma once

// Combinatorics of spin configurations on the N-cycle: maximal same-sign
// arcs, aligned/frustrated bonds, edge and vertex boundaries.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "ising/configuration.hpp"
#include "ising/errors.hpp"

namespace ising {

/// Ring bond in canonical orientation (i, i+1 mod N), 1-based. For N = 2 the
/// two bonds (1,2) and (2,1) are distinct.
struct Bond {
  std::size_t first = 1;
  std::size_t second = 2;

  friend bool operator==(const Bond&, const Bond&) = default;
};

class RingGraph {
 public:
  explicit RingGraph(std::size_t n) : n_(n) {
    if (n < 2) throw ArgumentError("the ring needs at least 2 sites");
  }

  std::size_t n() const { return n_; }

  /// Bond k (1-based) joins site k to site k+1 mod N.
  Bond bond(std::size_t k) const { return Bond{k, k % n_ + 1}; }

  std::vector<Bond> edges() const {
    std::vector<Bond> out;
    out.reserve(n_);
    for (std::size_t k = 1; k <= n_; ++k) out.push_back(bond(k));
    return out;
  }

 private:
  std::size_t n_;
};

/// Connected components of the plus and minus sites, ordered by smallest
/// site index, together with the aligned and frustrated bond sets.
struct ClusterDecomposition {
  std::vector<Arc> plus_components;
  std::vector<Arc> minus_components;
  std::vector<Bond> aligned_bonds;
  std::vector<Bond> frustrated_bonds;

  std::size_t plus_count() const { return plus_components.size(); }
  std::size_t minus_count() const { return minus_components.size(); }
  bool is_aligned() const { return frustrated_bonds.empty(); }
};

namespace detail {

inline std::size_t arc_min_site(const Arc& a, std::size_t n) {
  return a.start + a.length - 1 > n ? 1 : a.start;
}

inline void sort_components(std::vector<Arc>& arcs, std::size_t n) {
  std::sort(arcs.begin(), arcs.end(), [n](const Arc& x, const Arc& y) {
    return arc_min_site(x, n) < arc_min_site(y, n);
  });
}

}  // namespace detail

inline ClusterDecomposition decompose(const Configuration& c) {
  const std::size_t n = c.n();
  ClusterDecomposition out;
  std::size_t first_break = n;  // 0-based k with bond (k, k+1) frustrated
  for (std::size_t k = 0; k < n; ++k) {
    const Bond b{k + 1, (k + 1) % n + 1};
    if (c[k] == c[(k + 1) % n]) {
      out.aligned_bonds.push_back(b);
    } else {
      out.frustrated_bonds.push_back(b);
      if (first_break == n) first_break = k;
    }
  }
  if (first_break == n) {
    (c[0] == 1 ? out.plus_components : out.minus_components).push_back(Arc{1, n});
    return out;
  }
  // Walk the ring starting just after a frustrated bond so no arc is split.
  const std::size_t origin = (first_break + 1) % n;
  std::size_t run_start = origin;
  std::size_t run_length = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t k = (origin + t) % n;
    ++run_length;
    const std::size_t next = (k + 1) % n;
    if (c[k] != c[next]) {
      (c[k] == 1 ? out.plus_components : out.minus_components).push_back(Arc{run_start + 1, run_length});
      run_start = next;
      run_length = 0;
    }
  }
  detail::sort_components(out.plus_components, n);
  detail::sort_components(out.minus_components, n);
  return out;
}

/// Bonds with exactly one endpoint in the set, sorted by bond index.
inline std::vector<Bond> edge_boundary(const FlipSet& set, const RingGraph& g) {
  if (set.n() != g.n()) throw ArgumentError("flip set size does not match ring");
  std::vector<Bond> out;
  for (std::size_t k = 1; k <= g.n(); ++k) {
    const Bond b = g.bond(k);
    if (set.contains_index(b.first - 1) != set.contains_index(b.second - 1)) out.push_back(b);
  }
  return out;
}

/// Sites of the set with at least one ring neighbour outside it, ascending.
inline std::vector<std::size_t> vertex_boundary(const FlipSet& set, const RingGraph& g) {
  if (set.n() != g.n()) throw ArgumentError("flip set size does not match ring");
  const std::size_t n = g.n();
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < n; ++k) {
    if (!set.contains_index(k)) continue;
    if (!set.contains_index((k + 1) % n) || !set.contains_index((k + n - 1) % n)) out.push_back(k + 1);
  }
  return out;
}

/// True iff the set is a nonempty arc mod N or the whole ring.
inline bool is_connected(const FlipSet& set, const RingGraph& g) {
  if (set.n() != g.n()) throw ArgumentError("flip set size does not match ring");
  return set.arc().has_value();
}

/// True iff every site of the set carries the same spin.
inline bool is_aligned_on(const Configuration& c, const FlipSet& set) {
  const Bits& m = set.mask();
  const Bits& plus = c.plus_bits();
  return (m & plus) == m || (m & plus).none();
}

}  // namespace ising
