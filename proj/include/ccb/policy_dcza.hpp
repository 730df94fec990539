#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "ccb/context.hpp"
#include "ccb/policy_common.hpp"

namespace ccb {

struct DczaSelection {
  ArmId arm;
  Phase phase = Phase::Exploitation;
  CubeId cube;
  bool set_empty_pre = false;
  bool set_empty_post = false;
};

// Distributed context zooming state. The learner's own partition is an
// adaptive split tree; every cube it ever activated, plus every cube a peer
// asked it to create, is tracked in a flat map of labeled-arrival counts so
// that peer queries can be answered for arbitrary cubes. Peer-requested
// cubes never alter the learner's own partition.
class DczaState {
 public:
  DczaState() = default;
  DczaState(int d, double A, double p, std::vector<ArmId> arms, int own_count,
            bool child_memory = false, bool split_strict = false)
      : tree_(d, A, p, split_strict),
        arms_(std::move(arms)),
        own_count_(own_count),
        child_memory_(child_memory),
        d_(d) {
    const CubeId root = CubeId::root(d);
    stats_.emplace(root, make_stats());
    labeled_counts_[root] = 0;
  }

  const AdaptiveTree& tree() const { return tree_; }
  const std::vector<ArmId>& arms() const { return arms_; }
  int own_count() const { return own_count_; }
  bool child_memory() const { return child_memory_; }

  CubeId locate(const Context& x) const { return tree_.locate(x); }
  CellStats& cube_stats(const CubeId& c) { return stats_.at(c); }
  const CellStats& cube_stats(const CubeId& c) const { return stats_.at(c); }
  const std::map<CubeId, CellStats>& all_stats() const { return stats_; }

  int arm_slot(const ArmId& a) const {
    for (int s = 0; s < static_cast<int>(arms_.size()); ++s)
      if (arms_[static_cast<std::size_t>(s)] == a) return s;
    throw ConfigError("DczaState: unknown arm " + a.label());
  }

  DczaSelection select(const Context& x, std::int64_t t, const ControlValues& D,
                       const PeerCountQuery& query, const PeerCubeCreate& create) {
    const CubeId c = locate(x);
    CellStats& cs = stats_.at(c);
    BranchSelection b = select_branch(cs, arms_, own_count_, D, query, create,
                                      [&](int slot) { return exploit_value(cs, slot); });
    cs.arms[static_cast<std::size_t>(b.arm_slot)].selected += 1;
    return {arms_[static_cast<std::size_t>(b.arm_slot)], b.phase, c, b.set_empty_pre,
            b.set_empty_post};
  }

  std::pair<int, Phase> select_own(const Context& x, const ControlValues& D) const {
    const CubeId c = locate(x);
    return select_own_restricted(stats_.at(c), own_count_, D.D1);
  }

  // Record an outcome for a cube. The cube may have been deactivated by a
  // split while the label was in flight; its stats are kept and updated, they
  // just no longer drive selections.
  void record(const CubeId& c, const ArmId& arm, Phase phase, double reward, const Context& x) {
    auto it = stats_.find(c);
    if (it == stats_.end()) return;
    CellStats& cs = it->second;
    const int slot = arm_slot(arm);
    record_outcome(cs, slot, arm.is_peer() ? slot - own_count_ : -1, phase, reward);
    if (child_memory_ && phase != Phase::Training) {
      ArmStats& slot_mem =
          cs.child_mem[static_cast<std::size_t>(slot)][static_cast<std::size_t>(child_slot(c, x))];
      slot_mem.add_reward(reward);
    }
  }

  // A labeled arrival (own data or served request) at x: bump the count of
  // every tracked cube that geometrically contains x, and the observed-label
  // histogram of the active cube.
  void labeled_arrival(const Context& x, int true_label) {
    for (int l = 0; l <= max_count_level_; ++l) {
      auto it = labeled_counts_.find(cube_at(x, l));
      if (it != labeled_counts_.end()) it->second += 1;
    }
    auto st = stats_.find(tree_.locate(x));
    if (st != stats_.end()) st->second.label_count[true_label] += 1;
  }

  // Peer-side handlers for the branch-(b) protocol.
  std::optional<std::int64_t> peer_count(const CubeId& c) const {
    auto it = labeled_counts_.find(c);
    if (it == labeled_counts_.end()) return std::nullopt;
    return it->second;
  }

  void create_cube(const CubeId& c) {
    if (labeled_counts_.emplace(c, 0).second)
      max_count_level_ = std::max(max_count_level_, c.level);
  }

  // End-of-slot split check for the learner's own arrival at x. New cubes
  // start zeroed, or seeded from the recorded per-child statistics when
  // child memory is on.
  std::vector<CubeId> after_slot(const Context& x) {
    AdaptiveTree::SplitResult res = tree_.observe_and_maybe_split(x);
    for (const CubeId& child : res.created) {
      CellStats fresh = make_stats();
      if (child_memory_) {
        const CellStats& parent = stats_.at(res.cube);
        for (int s = 0; s < static_cast<int>(arms_.size()); ++s) {
          const ArmStats& mem =
              parent.child_mem[static_cast<std::size_t>(s)][static_cast<std::size_t>(
                  child_offset(res.cube, child))];
          fresh.arms[static_cast<std::size_t>(s)].n = mem.n;
          fresh.arms[static_cast<std::size_t>(s)].mean = mem.mean;
          fresh.arms[static_cast<std::size_t>(s)].selected = mem.n;
        }
      }
      stats_.emplace(child, std::move(fresh));
      create_cube(child);
      max_count_level_ = std::max(max_count_level_, child.level);
    }
    return res.created;
  }

  // Exploitation value: the plain sample mean, or with child memory the
  // unweighted average of the child means that have at least one sample.
  double exploit_value(const CellStats& cs, int slot) const {
    const ArmStats& a = cs.arms[static_cast<std::size_t>(slot)];
    if (child_memory_ && !cs.child_mem.empty()) {
      double sum = 0.0;
      int sampled = 0;
      for (const ArmStats& mem : cs.child_mem[static_cast<std::size_t>(slot)]) {
        if (mem.n > 0) {
          sum += mem.mean;
          ++sampled;
        }
      }
      if (sampled > 0) return sum / sampled;
    }
    if (a.n > 0) return a.mean;
    return -std::numeric_limits<double>::infinity();
  }

  double exploit_mean(const CubeId& c, const ArmId& arm) const {
    return exploit_value(stats_.at(c), arm_slot(arm));
  }

 private:
  CellStats make_stats() const {
    CellStats cs(static_cast<int>(arms_.size()), static_cast<int>(arms_.size()) - own_count_);
    if (child_memory_) {
      cs.child_mem.assign(arms_.size(),
                          std::vector<ArmStats>(static_cast<std::size_t>(1) << d_));
    }
    return cs;
  }

  // Which child slot of `parent` the cube `child` occupies.
  static int child_offset(const CubeId& parent, const CubeId& child) {
    int slot = 0;
    for (int a = 0; a < parent.dim(); ++a) {
      slot |= static_cast<int>(child.index[static_cast<std::size_t>(a)] -
                               2 * parent.index[static_cast<std::size_t>(a)])
              << a;
    }
    return slot;
  }

  AdaptiveTree tree_;
  std::vector<ArmId> arms_;
  int own_count_ = 0;
  bool child_memory_ = false;
  int d_ = 1;
  int max_count_level_ = 0;
  std::map<CubeId, CellStats> stats_;          // own cubes, active and historical
  std::map<CubeId, std::int64_t> labeled_counts_;  // every cube ever created or requested
};

}  // namespace ccb
