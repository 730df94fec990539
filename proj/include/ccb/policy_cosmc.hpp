#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ccb/policy_cos.hpp"
#include "ccb/rng.hpp"

namespace ccb {

struct McSelection {
  ArmId arm;
  Phase phase = Phase::Exploitation;
  int dim = 0;           // context dimension the decision was made in
  std::int64_t cell = 0;  // cell of x^dim within that dimension
  bool union_empty_pre = false;
};

// CoS with multiple candidate contexts: one independent one-dimensional
// CoS state per coordinate, all sharing the arm set. Under-exploration is
// resolved per dimension; exploitation takes the argmax over (dimension,
// arm) sample means. When several dimensions still have under-explored
// arms, one of them is drawn uniformly with the run's seeded generator and
// the regular CoS branch runs inside it, so with d = 1 the trace coincides
// with plain CoS.
class McState {
 public:
  using DimPeerQuery = std::function<std::int64_t(int dim, int peer_learner)>;

  McState() = default;
  McState(int d, int m_T, std::vector<ArmId> arms, int own_count) : d_(d) {
    subs_.reserve(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m)
      subs_.emplace_back(UniformPartition(m_T, 1), arms, own_count);
  }

  int dims() const { return d_; }
  CosState& sub(int m) { return subs_[static_cast<std::size_t>(m)]; }
  const CosState& sub(int m) const { return subs_[static_cast<std::size_t>(m)]; }

  static Context coordinate(const Context& x, int m) { return Context({x[m]}); }

  McSelection select(const Context& x, std::int64_t t, const ControlValues& D,
                     const DimPeerQuery& query, Rng& rng) {
    if (x.dim() != d_) throw ConfigError("McState: context dimension mismatch");
    std::vector<int> candidates;
    for (int m = 0; m < d_; ++m) {
      if (!subs_[static_cast<std::size_t>(m)]
               .underexplored(subs_[static_cast<std::size_t>(m)].cell_of(coordinate(x, m)), D)
               .empty())
        candidates.push_back(m);
    }
    const bool union_empty = candidates.empty();

    // Resolve under-explored dimensions; a dimension whose training candidate
    // clears the gate on refresh may fall through, in which case the next
    // candidate dimension is tried.
    while (!candidates.empty()) {
      std::size_t pick = 0;
      if (candidates.size() > 1)
        pick = std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng);
      const int m = candidates[pick];
      CosState& sub = subs_[static_cast<std::size_t>(m)];
      const std::int64_t cell = sub.cell_of(coordinate(x, m));
      auto forced = select_forced(
          sub.cell(cell), sub.arms(), sub.own_count(), D,
          [&](int peer) -> std::optional<std::int64_t> { return query(m, peer); },
          PeerCubeCreate{});
      if (forced) {
        sub.cell(cell).arms[static_cast<std::size_t>(forced->first)].selected += 1;
        return {sub.arms()[static_cast<std::size_t>(forced->first)], forced->second, m, cell,
                union_empty};
      }
      candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
    }

    // Exploit the best (dimension, arm) pair; ties to the lowest (m, k).
    double best = -std::numeric_limits<double>::infinity();
    int best_dim = 0;
    int best_slot = 0;
    for (int m = 0; m < d_; ++m) {
      const CosState& sub = subs_[static_cast<std::size_t>(m)];
      const CellStats& cs = sub.cell(sub.cell_of(coordinate(x, m)));
      for (int s = 0; s < static_cast<int>(sub.arms().size()); ++s) {
        const ArmStats& a = cs.arms[static_cast<std::size_t>(s)];
        const double v = a.n > 0 ? a.mean : -std::numeric_limits<double>::infinity();
        if (v > best) {
          best = v;
          best_dim = m;
          best_slot = s;
        }
      }
    }
    CosState& chosen = subs_[static_cast<std::size_t>(best_dim)];
    const std::int64_t cell = chosen.cell_of(coordinate(x, best_dim));
    chosen.cell(cell).arms[static_cast<std::size_t>(best_slot)].selected += 1;
    return {chosen.arms()[static_cast<std::size_t>(best_slot)], Phase::Exploitation, best_dim,
            cell, union_empty};
  }

  // Sample means of the selected arm update in every dimension whose cell
  // contains the corresponding coordinate; training bumps only the
  // triggering dimension's counter.
  void record_all_dims(const ArmId& arm, const Context& x, Phase phase, double reward,
                       int triggering_dim) {
    if (phase == Phase::Training) {
      CosState& sub = subs_[static_cast<std::size_t>(triggering_dim)];
      sub.record(sub.cell_of(coordinate(x, triggering_dim)), arm, phase, reward);
      return;
    }
    for (int m = 0; m < d_; ++m) {
      CosState& sub = subs_[static_cast<std::size_t>(m)];
      sub.record(sub.cell_of(coordinate(x, m)), arm, phase, reward);
    }
  }

  void labeled_arrival(const Context& x, int true_label) {
    for (int m = 0; m < d_; ++m) {
      CosState& sub = subs_[static_cast<std::size_t>(m)];
      sub.labeled_arrival(sub.cell_of(coordinate(x, m)), true_label);
    }
  }

  // Own-function-restricted service across all dimensions: explore the first
  // under-gated (dimension, function) pair, else exploit the best one.
  std::pair<int, Phase> select_own(const Context& x, const ControlValues& D) const {
    const int own = subs_[0].own_count();
    for (int m = 0; m < d_; ++m) {
      const CosState& sub = subs_[static_cast<std::size_t>(m)];
      const CellStats& cs = sub.cell(sub.cell_of(coordinate(x, m)));
      for (int s = 0; s < own; ++s)
        if (static_cast<double>(cs.arms[static_cast<std::size_t>(s)].n) <= D.D1)
          return {s, Phase::Exploration};
    }
    double best = -std::numeric_limits<double>::infinity();
    int best_slot = 0;
    for (int m = 0; m < d_; ++m) {
      const CosState& sub = subs_[static_cast<std::size_t>(m)];
      const CellStats& cs = sub.cell(sub.cell_of(coordinate(x, m)));
      for (int s = 0; s < own; ++s) {
        const double v = cs.arms[static_cast<std::size_t>(s)].mean;
        if (v > best) {
          best = v;
          best_slot = s;
        }
      }
    }
    return {best_slot, Phase::Exploitation};
  }

 private:
  int d_ = 1;
  std::vector<CosState> subs_;
};

}  // namespace ccb
