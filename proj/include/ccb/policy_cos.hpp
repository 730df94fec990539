#pragma once

#include <cstdint>
#include <vector>

#include "ccb/context.hpp"
#include "ccb/policy_common.hpp"

namespace ccb {

struct CosSelection {
  ArmId arm;
  Phase phase = Phase::Exploitation;
  std::int64_t cell = 0;
  bool set_empty_pre = false;
  bool set_empty_post = false;
};

// Classify-or-Send state: a uniform partition of [0,1]^d where every cell is
// an independent bandit over the learner's arms.
class CosState {
 public:
  CosState() = default;
  CosState(UniformPartition part, std::vector<ArmId> arms, int own_count)
      : part_(part), arms_(std::move(arms)), own_count_(own_count) {
    cells_.assign(static_cast<std::size_t>(part_.cell_count()),
                  CellStats(static_cast<int>(arms_.size()),
                            static_cast<int>(arms_.size()) - own_count_));
  }

  const UniformPartition& partition() const { return part_; }
  const std::vector<ArmId>& arms() const { return arms_; }
  int own_count() const { return own_count_; }
  std::int64_t cell_of(const Context& x) const { return part_.flat_index(x); }
  CellStats& cell(std::int64_t c) { return cells_[static_cast<std::size_t>(c)]; }
  const CellStats& cell(std::int64_t c) const { return cells_[static_cast<std::size_t>(c)]; }

  int arm_slot(const ArmId& a) const {
    for (int s = 0; s < static_cast<int>(arms_.size()); ++s)
      if (arms_[static_cast<std::size_t>(s)] == a) return s;
    throw ConfigError("CosState: unknown arm " + a.label());
  }
  int peer_slot(const ArmId& a) const { return arm_slot(a) - own_count_; }

  CosSelection select(const Context& x, std::int64_t t, const ControlValues& D,
                      const PeerCountQuery& query) {
    const std::int64_t c = cell_of(x);
    CellStats& cs = cells_[static_cast<std::size_t>(c)];
    BranchSelection b = select_branch(
        cs, arms_, own_count_, D, query, PeerCubeCreate{},
        [&](int slot) { return cs.arms[static_cast<std::size_t>(slot)].mean; });
    cs.arms[static_cast<std::size_t>(b.arm_slot)].selected += 1;
    return {arms_[static_cast<std::size_t>(b.arm_slot)], b.phase, c, b.set_empty_pre,
            b.set_empty_post};
  }

  // Serve a peer request: own functions only, explore-then-exploit.
  std::pair<int, Phase> select_own(const Context& x, const ControlValues& D) const {
    const std::int64_t c = cell_of(x);
    return select_own_restricted(cells_[static_cast<std::size_t>(c)], own_count_, D.D1);
  }

  void record(std::int64_t c, const ArmId& arm, Phase phase, double reward) {
    const int slot = arm_slot(arm);
    record_outcome(cells_[static_cast<std::size_t>(c)], slot,
                   arm.is_peer() ? slot - own_count_ : -1, phase, reward);
  }

  // A labeled arrival in this cell (own data or a served request).
  void labeled_arrival(std::int64_t c, int true_label) {
    CellStats& cs = cells_[static_cast<std::size_t>(c)];
    cs.labeled_arrivals += 1;
    cs.label_count[true_label] += 1;
  }

  std::int64_t arrival_count(std::int64_t c) const {
    return cells_[static_cast<std::size_t>(c)].labeled_arrivals;
  }

  std::vector<UnderexploredEntry> underexplored(std::int64_t c, const ControlValues& D) const {
    return underexplored_set(cells_[static_cast<std::size_t>(c)], arms_, own_count_, D);
  }

 private:
  UniformPartition part_;
  std::vector<ArmId> arms_;
  int own_count_ = 0;
  std::vector<CellStats> cells_;
};

}  // namespace ccb
