#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "ccb/arms.hpp"
#include "ccb/context.hpp"
#include "ccb/rng.hpp"

namespace ccb {

// Probability that the true label is 1 given the context.
struct EtaModel {
  enum class Kind { Constant, Linear, Step };
  Kind kind = Kind::Constant;
  double value = 0.5;      // Constant
  double threshold = 0.5;  // Step
  double low = 0.0;
  double high = 1.0;

  double operator()(const Context& x) const {
    switch (kind) {
      case Kind::Constant: return value;
      case Kind::Linear: return std::clamp(x[0], 0.0, 1.0);
      case Kind::Step: return x[0] <= threshold ? low : high;
    }
    return value;
  }
};

inline int draw_label(const EtaModel& eta, const Context& x, Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eta(x) ? 1 : 0;
}

// Known accuracy functions per (learner, own function); only available in
// synthetic mode, where the perfect-information oracle is defined.
struct SyntheticWorld {
  std::vector<std::vector<SyntheticArm>> arms;  // [learner][function]
  EtaModel eta;
};

// Context arrival regimes. Worst-case arrivals are uniform with pairwise
// separation >= T^(-1/d), realized as a random permutation of a jittered
// grid with exactly that spacing. Best-case arrivals all fall inside one
// level ceil(log2(T)/p)+1 cube.
struct ArrivalConfig {
  enum class Kind { IidUniform, UniformRange, Worst, Best, Trace };
  enum class Correlation { Independent, Best, Worst };

  Kind kind = Kind::IidUniform;
  Correlation correlation = Correlation::Best;
  int designated = 0;  // receiver under worst-case correlation
  std::vector<double> lo, hi;  // UniformRange bounds per axis
  std::vector<Context> trace;
  double best_p = 2.0;  // split exponent used to size the best-case cube
};

class ContextStream {
 public:
  ContextStream() = default;
  ContextStream(const ArrivalConfig& cfg, int d, std::int64_t T, Rng rng)
      : cfg_(cfg), d_(d), T_(std::max<std::int64_t>(T, 1)), rng_(std::move(rng)) {
    switch (cfg_.kind) {
      case ArrivalConfig::Kind::Worst: build_worst_grid(); break;
      case ArrivalConfig::Kind::Best: pick_best_cube(); break;
      default: break;
    }
  }

  Context next(std::int64_t t) {
    switch (cfg_.kind) {
      case ArrivalConfig::Kind::IidUniform: {
        return uniform_box(std::vector<double>(static_cast<std::size_t>(d_), 0.0),
                           std::vector<double>(static_cast<std::size_t>(d_), 1.0));
      }
      case ArrivalConfig::Kind::UniformRange:
        return uniform_box(cfg_.lo, cfg_.hi);
      case ArrivalConfig::Kind::Worst: {
        const std::size_t i = static_cast<std::size_t>((t - 1) % static_cast<std::int64_t>(grid_order_.size()));
        return grid_point(grid_order_[i]);
      }
      case ArrivalConfig::Kind::Best:
        return uniform_box(best_lo_, best_hi_);
      case ArrivalConfig::Kind::Trace: {
        if (cfg_.trace.empty()) throw ConfigError("ContextStream: empty trace");
        return cfg_.trace[static_cast<std::size_t>((t - 1) % static_cast<std::int64_t>(cfg_.trace.size()))];
      }
    }
    throw ConfigError("ContextStream: unknown arrival kind");
  }

  Rng& rng() { return rng_; }

 private:
  Context uniform_box(const std::vector<double>& lo, const std::vector<double>& hi) {
    std::vector<double> c(static_cast<std::size_t>(d_));
    for (int a = 0; a < d_; ++a) {
      const double l = lo[static_cast<std::size_t>(a)];
      const double h = hi[static_cast<std::size_t>(a)];
      c[static_cast<std::size_t>(a)] =
          std::uniform_real_distribution<double>(l, h)(rng_);
    }
    return Context(std::move(c));
  }

  void build_worst_grid() {
    spacing_ = std::pow(static_cast<double>(T_), -1.0 / d_);
    points_per_axis_ = static_cast<std::int64_t>(std::floor(1.0 / spacing_)) + 1;
    const double span = spacing_ * static_cast<double>(points_per_axis_ - 1);
    const double slack = std::max(0.0, 1.0 - span);
    offset_ = std::uniform_real_distribution<double>(0.0, slack)(rng_);
    std::int64_t total = 1;
    for (int a = 0; a < d_; ++a) total *= points_per_axis_;
    grid_order_.resize(static_cast<std::size_t>(total));
    std::iota(grid_order_.begin(), grid_order_.end(), std::int64_t{0});
    std::shuffle(grid_order_.begin(), grid_order_.end(), rng_);
    if (total > T_) grid_order_.resize(static_cast<std::size_t>(T_));
  }

  Context grid_point(std::int64_t flat) const {
    std::vector<double> c(static_cast<std::size_t>(d_));
    for (int a = d_ - 1; a >= 0; --a) {
      const std::int64_t k = flat % points_per_axis_;
      flat /= points_per_axis_;
      c[static_cast<std::size_t>(a)] = std::min(1.0, offset_ + spacing_ * static_cast<double>(k));
    }
    return Context(std::move(c));
  }

  void pick_best_cube() {
    const int level =
        static_cast<int>(std::ceil(std::log2(static_cast<double>(T_)) / cfg_.best_p)) + 1;
    const double side = std::ldexp(1.0, -level);
    best_lo_.assign(static_cast<std::size_t>(d_), 0.0);
    best_hi_.assign(static_cast<std::size_t>(d_), 0.0);
    for (int a = 0; a < d_; ++a) {
      const std::uint64_t cells = 1ULL << level;
      const std::uint64_t k =
          std::uniform_int_distribution<std::uint64_t>(0, cells - 1)(rng_);
      best_lo_[static_cast<std::size_t>(a)] = side * static_cast<double>(k);
      best_hi_[static_cast<std::size_t>(a)] = side * static_cast<double>(k + 1);
    }
  }

  ArrivalConfig cfg_;
  int d_ = 1;
  std::int64_t T_ = 1;
  Rng rng_;
  // worst-case grid
  double spacing_ = 0.0;
  double offset_ = 0.0;
  std::int64_t points_per_axis_ = 0;
  std::vector<std::int64_t> grid_order_;
  // best-case cube
  std::vector<double> best_lo_, best_hi_;
};

}  // namespace ccb
