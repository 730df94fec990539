#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "ccb/common.hpp"

namespace ccb {

// A context is a point in [0,1]^d. Dimension is fixed within a run.
struct Context {
  std::vector<double> coords;

  Context() = default;
  explicit Context(std::vector<double> c) : coords(std::move(c)) {}
  Context(std::initializer_list<double> c) : coords(c) {}

  int dim() const { return static_cast<int>(coords.size()); }
  double operator[](int axis) const { return coords[static_cast<std::size_t>(axis)]; }

  bool valid() const {
    if (coords.empty()) return false;
    for (double v : coords)
      if (!(v >= 0.0 && v <= 1.0)) return false;
    return true;
  }
};

// Uniform partition of [0,1]^d into (m_T)^d half-open cells
// ((l-1)/m_T, l/m_T] per axis, with coordinate 0 assigned to the first cell
// so the cells tile the space exactly.
struct UniformPartition {
  int m_T = 1;
  int d = 1;

  UniformPartition() = default;
  UniformPartition(int slices, int dim) : m_T(slices), d(dim) {
    if (slices < 1 || dim < 1) throw ConfigError("UniformPartition: m_T and d must be >= 1");
  }

  std::int64_t cell_count() const {
    std::int64_t n = 1;
    for (int a = 0; a < d; ++a) n *= m_T;
    return n;
  }

  // 1-based cell index per axis: l such that x in ((l-1)/m_T, l/m_T],
  // except x == 0 maps to l = 1.
  std::vector<int> locate(const Context& x) const {
    if (x.dim() != d) throw ConfigError("locate_uniform: context dimension mismatch");
    std::vector<int> idx(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
      const double v = x[a];
      int l = (v <= 0.0) ? 1 : static_cast<int>(std::ceil(v * m_T));
      l = std::clamp(l, 1, m_T);
      idx[static_cast<std::size_t>(a)] = l;
    }
    return idx;
  }

  // Flattened 0-based cell id for table lookups.
  std::int64_t flat_index(const Context& x) const {
    const std::vector<int> idx = locate(x);
    std::int64_t f = 0;
    for (int a = 0; a < d; ++a) f = f * m_T + (idx[static_cast<std::size_t>(a)] - 1);
    return f;
  }
};

// A dyadic hypercube: level l, per-axis index < 2^l, side 2^-l.
// Level 0 with all-zero index is the whole space.
struct CubeId {
  int level = 0;
  std::vector<std::uint64_t> index;

  CubeId() = default;
  CubeId(int lvl, std::vector<std::uint64_t> idx) : level(lvl), index(std::move(idx)) {}

  static CubeId root(int d) { return CubeId(0, std::vector<std::uint64_t>(static_cast<std::size_t>(d), 0)); }

  int dim() const { return static_cast<int>(index.size()); }

  friend bool operator==(const CubeId& a, const CubeId& b) {
    return a.level == b.level && a.index == b.index;
  }
  friend bool operator<(const CubeId& a, const CubeId& b) {
    if (a.level != b.level) return a.level < b.level;
    return a.index < b.index;
  }

  std::string label() const {
    std::string s = "l" + std::to_string(level) + ":";
    for (std::size_t a = 0; a < index.size(); ++a) {
      if (a) s += ",";
      s += std::to_string(index[a]);
    }
    return s;
  }
};

// Per-axis dyadic index of the cube of the given level containing v under
// the half-open convention ((k)2^-l, (k+1)2^-l], v == 0 to index 0.
inline std::uint64_t dyadic_index(double v, int level) {
  if (v <= 0.0) return 0;
  const double scaled = std::ldexp(v, level);  // v * 2^level, exact scaling
  const double c = std::ceil(scaled);
  std::uint64_t k = static_cast<std::uint64_t>(c) - 1;
  const std::uint64_t last = (level >= 63) ? ~0ULL : ((1ULL << level) - 1);
  return std::min(k, last);
}

inline bool cube_contains(const CubeId& c, const Context& x) {
  if (c.dim() != x.dim()) throw ConfigError("cube_contains: dimension mismatch");
  for (int a = 0; a < x.dim(); ++a) {
    if (dyadic_index(x[a], c.level) != c.index[static_cast<std::size_t>(a)]) return false;
  }
  return true;
}

inline CubeId cube_at(const Context& x, int level) {
  std::vector<std::uint64_t> idx(static_cast<std::size_t>(x.dim()));
  for (int a = 0; a < x.dim(); ++a) idx[static_cast<std::size_t>(a)] = dyadic_index(x[a], level);
  return CubeId(level, std::move(idx));
}

// The 2^d level l+1 cubes whose union is c. Child index doubles the parent
// index per axis plus a 0/1 offset.
inline std::vector<CubeId> children(const CubeId& c) {
  const int d = c.dim();
  std::vector<CubeId> out;
  out.reserve(1ULL << d);
  for (std::uint64_t mask = 0; mask < (1ULL << d); ++mask) {
    std::vector<std::uint64_t> idx(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a)
      idx[static_cast<std::size_t>(a)] = 2 * c.index[static_cast<std::size_t>(a)] + ((mask >> a) & 1ULL);
    out.emplace_back(c.level + 1, std::move(idx));
  }
  return out;
}

// Which child slot (0 .. 2^d-1) of cube c contains x. Slot bit a is the
// offset of the child index on axis a.
inline int child_slot(const CubeId& c, const Context& x) {
  int slot = 0;
  for (int a = 0; a < x.dim(); ++a) {
    const std::uint64_t child_idx = dyadic_index(x[a], c.level + 1);
    slot |= static_cast<int>(child_idx - 2 * c.index[static_cast<std::size_t>(a)]) << a;
  }
  return slot;
}

// Adaptive binary-split tree over [0,1]^d. Active cubes tile the space; a
// level-l cube splits into its 2^d children once its arrival count reaches
// A * 2^(p*l). With split_strict the comparison is > instead of >=.
class AdaptiveTree {
 public:
  struct SplitResult {
    CubeId cube;                  // active cube that contained x before any split
    std::vector<CubeId> created;  // newly activated cubes (empty if no split)
  };

  AdaptiveTree() = default;
  AdaptiveTree(int d, double A, double p, bool split_strict = false)
      : d_(d), A_(A), p_(p), split_strict_(split_strict) {
    if (d < 1) throw ConfigError("AdaptiveTree: d must be >= 1");
    if (!(A > 0.0) || !(p > 0.0)) throw ConfigError("AdaptiveTree: A and p must be positive");
    active_[CubeId::root(d)] = 0;
  }

  int dim() const { return d_; }
  double A() const { return A_; }
  double p() const { return p_; }
  std::int64_t total_arrivals() const { return total_arrivals_; }

  const std::map<CubeId, std::int64_t>& active() const { return active_; }
  bool is_active(const CubeId& c) const { return active_.count(c) != 0; }

  CubeId locate(const Context& x) const {
    if (x.dim() != d_) throw ConfigError("AdaptiveTree::locate: dimension mismatch");
    for (int l = 0; l <= max_level_; ++l) {
      CubeId c = cube_at(x, l);
      if (active_.count(c)) return c;
    }
    throw std::logic_error("AdaptiveTree: no active cube contains context (tiling broken)");
  }

  int max_active_level() const { return max_level_; }

  double split_threshold(int level) const { return A_ * std::exp2(p_ * level); }

  SplitResult observe_and_maybe_split(const Context& x) {
    CubeId c = locate(x);
    ++total_arrivals_;
    auto it = active_.find(c);
    const std::int64_t n = ++it->second;
    SplitResult res{c, {}};
    const double thr = split_threshold(c.level);
    const bool split = split_strict_ ? (static_cast<double>(n) > thr)
                                     : (static_cast<double>(n) >= thr);
    if (split) {
      active_.erase(it);
      res.created = children(c);
      for (const CubeId& child : res.created) active_[child] = 0;
      max_level_ = std::max(max_level_, c.level + 1);
      check_level_bound(c.level + 1);
    }
    return res;
  }

 private:
  // After t arrivals, any level reached by splitting satisfies
  // level <= floor(log2(max(t/A, 1)) / p) + 1.
  void check_level_bound(int new_level) const {
    const double ratio = std::max(static_cast<double>(total_arrivals_) / A_, 1.0);
    const int bound = static_cast<int>(std::floor(std::log2(ratio) / p_)) + 1;
    if (new_level > bound)
      throw std::logic_error("AdaptiveTree: split produced level beyond the A*2^(pl) bound");
  }

  int d_ = 1;
  double A_ = 1.0;
  double p_ = 2.0;
  bool split_strict_ = false;
  int max_level_ = 0;
  std::int64_t total_arrivals_ = 0;
  std::map<CubeId, std::int64_t> active_;
};

}  // namespace ccb
