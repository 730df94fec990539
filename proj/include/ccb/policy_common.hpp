#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ccb/common.hpp"
#include "ccb/context.hpp"
#include "ccb/control.hpp"

namespace ccb {

// Sample stats per (cell-or-cube, arm): selection counter with observed label
// and the running sample-mean reward. Training rewards never touch the mean.
struct ArmStats {
  std::int64_t n = 0;      // labeled explore/exploit selections
  double mean = 0.0;       // sample-mean reward in [-1, 1]
  std::int64_t selected = 0;  // all selections, labeled or not (bookkeeping)

  void add_reward(double r) {
    mean = (static_cast<double>(n) * mean + r) / static_cast<double>(n + 1);
    ++n;
  }
};

// Stats a learner keeps for one cell (CoS) or one hypercube (DCZA).
struct CellStats {
  std::vector<ArmStats> arms;      // one slot per arm, own functions first
  std::vector<std::int64_t> n1;    // training counters, one per peer arm
  std::int64_t labeled_arrivals = 0;  // arrivals with observed label, incl. served requests
  std::int64_t label_count[2] = {0, 0};  // observed true-label histogram (context-only replies)
  // Optional child memory: per arm, 2^d per-child (count, mean) records.
  std::vector<std::vector<ArmStats>> child_mem;

  CellStats() = default;
  CellStats(int arm_slots, int peer_slots)
      : arms(static_cast<std::size_t>(arm_slots)), n1(static_cast<std::size_t>(peer_slots), 0) {}
};

inline void record_outcome(CellStats& cs, int arm_slot, int peer_slot, Phase phase,
                           double reward) {
  if (!(reward >= -1.0 - 1e-12 && reward <= 1.0 + 1e-12))
    throw std::logic_error("record_outcome: reward outside [-1, 1]");
  if (phase == Phase::Training) {
    cs.n1[static_cast<std::size_t>(peer_slot)] += 1;  // mean untouched by design of the training phase
  } else {
    cs.arms[static_cast<std::size_t>(arm_slot)].add_reward(reward);
  }
}

enum class UnderexploredReason { OwnExploration, TrainingCandidate, ExplorationCandidate };

struct UnderexploredEntry {
  ArmId arm;
  UnderexploredReason reason;
};

// The under-explored set S_{i,l}(t), in branch-priority order: own arms with
// N <= D1, then peers with N1 <= D2, then peers with N <= D3. A peer that
// qualifies as a training candidate is not repeated as an exploration
// candidate.
inline std::vector<UnderexploredEntry> underexplored_set(const CellStats& cs,
                                                         const std::vector<ArmId>& arms,
                                                         int own_count,
                                                         const ControlValues& D) {
  std::vector<UnderexploredEntry> out;
  for (int s = 0; s < own_count; ++s) {
    if (static_cast<double>(cs.arms[static_cast<std::size_t>(s)].n) <= D.D1)
      out.push_back({arms[static_cast<std::size_t>(s)], UnderexploredReason::OwnExploration});
  }
  const int peer_count = static_cast<int>(arms.size()) - own_count;
  std::vector<bool> listed(static_cast<std::size_t>(peer_count), false);
  for (int ps = 0; ps < peer_count; ++ps) {
    if (static_cast<double>(cs.n1[static_cast<std::size_t>(ps)]) <= D.D2) {
      out.push_back({arms[static_cast<std::size_t>(own_count + ps)],
                     UnderexploredReason::TrainingCandidate});
      listed[static_cast<std::size_t>(ps)] = true;
    }
  }
  for (int ps = 0; ps < peer_count; ++ps) {
    if (listed[static_cast<std::size_t>(ps)]) continue;
    if (static_cast<double>(cs.arms[static_cast<std::size_t>(own_count + ps)].n) <= D.D3)
      out.push_back({arms[static_cast<std::size_t>(own_count + ps)],
                     UnderexploredReason::ExplorationCandidate});
  }
  return out;
}

// Peer counter lookup issued from branch (b). For the uniform partition the
// cell always exists at the peer; for the adaptive tree the reply may be
// "cube absent", in which case the caller instructs the peer to create it.
using PeerCountQuery = std::function<std::optional<std::int64_t>(int peer_learner)>;
using PeerCubeCreate = std::function<void(int peer_learner)>;

struct BranchSelection {
  int arm_slot = -1;
  Phase phase = Phase::Exploitation;
  bool set_empty_pre = false;   // stale S empty at slot start
  bool set_empty_post = false;  // S empty after this slot's counter refresh
};

// The forced part of the Fig.-2 branch structure: (a) own-arm exploration,
// (b) training with its one-peer counter refresh, (c) peer exploration.
// Returns nothing when all gates are closed and the slot exploits. Branch
// (b) queries at most one peer (the first whose stale training counter
// passes the gate); a failed refresh falls through to branch (c) for all
// peers. Ties break to the lowest arm slot, own arms before peers by
// construction.
inline std::optional<std::pair<int, Phase>> select_forced(CellStats& cs,
                                                          const std::vector<ArmId>& arms,
                                                          int own_count, const ControlValues& D,
                                                          const PeerCountQuery& query,
                                                          const PeerCubeCreate& create) {
  const int total = static_cast<int>(arms.size());
  const int peer_count = total - own_count;
  // (a) own-arm exploration
  for (int s = 0; s < own_count; ++s) {
    if (static_cast<double>(cs.arms[static_cast<std::size_t>(s)].n) <= D.D1)
      return std::make_pair(s, Phase::Exploration);
  }
  // (b) training: query the first peer whose stale counter passes the gate
  for (int ps = 0; ps < peer_count; ++ps) {
    auto& n1 = cs.n1[static_cast<std::size_t>(ps)];
    if (static_cast<double>(n1) > D.D2) continue;
    const int peer = arms[static_cast<std::size_t>(own_count + ps)].index;
    const std::optional<std::int64_t> reply = query(peer);
    if (!reply.has_value() || *reply == 0) {
      if (create) create(peer);
      n1 = 0;
    } else {
      n1 = *reply - cs.arms[static_cast<std::size_t>(own_count + ps)].n;
    }
    if (static_cast<double>(n1) <= D.D2) return std::make_pair(own_count + ps, Phase::Training);
    break;  // refreshed counter cleared the gate: go to branch (c)
  }
  // (c) peer exploration
  for (int ps = 0; ps < peer_count; ++ps) {
    if (static_cast<double>(cs.arms[static_cast<std::size_t>(own_count + ps)].n) <= D.D3)
      return std::make_pair(own_count + ps, Phase::Exploration);
  }
  return std::nullopt;
}

template <typename ExploitValueFn>
BranchSelection select_branch(CellStats& cs, const std::vector<ArmId>& arms, int own_count,
                              const ControlValues& D, const PeerCountQuery& query,
                              const PeerCubeCreate& create, ExploitValueFn&& exploit_value) {
  BranchSelection sel;
  sel.set_empty_pre = underexplored_set(cs, arms, own_count, D).empty();
  if (auto forced = select_forced(cs, arms, own_count, D, query, create)) {
    sel.arm_slot = forced->first;
    sel.phase = forced->second;
    return sel;
  }
  sel.set_empty_post = underexplored_set(cs, arms, own_count, D).empty();
  double best = -std::numeric_limits<double>::infinity();
  int best_slot = 0;
  for (int s = 0; s < static_cast<int>(arms.size()); ++s) {
    const double v = exploit_value(s);
    if (v > best) {
      best = v;
      best_slot = s;
    }
  }
  sel.arm_slot = best_slot;
  sel.phase = Phase::Exploitation;
  return sel;
}

// Own-function-restricted branch used when serving another learner's
// request: explore an own function that is still under the D1 gate, else
// exploit the empirically best one.
inline std::pair<int, Phase> select_own_restricted(const CellStats& cs, int own_count,
                                                   double D1) {
  for (int s = 0; s < own_count; ++s) {
    if (static_cast<double>(cs.arms[static_cast<std::size_t>(s)].n) <= D1)
      return {s, Phase::Exploration};
  }
  double best = -std::numeric_limits<double>::infinity();
  int best_slot = 0;
  for (int s = 0; s < own_count; ++s) {
    const double v = cs.arms[static_cast<std::size_t>(s)].mean;
    if (v > best) {
      best = v;
      best_slot = s;
    }
  }
  return {best_slot, Phase::Exploitation};
}

}  // namespace ccb
