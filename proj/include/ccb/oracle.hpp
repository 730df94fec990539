#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ccb/arms.hpp"
#include "ccb/common.hpp"
#include "ccb/context.hpp"
#include "ccb/environment.hpp"

namespace ccb {

// Perfect-information benchmark, defined only in synthetic mode where every
// accuracy function is known. For learner i the best arm at x maximizes
// accuracy minus cost; a peer's accuracy is that of its best own function.
struct OracleChoice {
  ArmId arm;
  double net = 0.0;       // pi - d of the best arm
  double accuracy = 0.0;  // pi of the best arm
};

class OracleMap {
 public:
  OracleMap() = default;
  // own_costs[i][f]: learner i's cost for its own function f.
  // peer_costs[i][j]: learner i's cost for peer j (+inf: not an arm).
  OracleMap(const SyntheticWorld* world, std::vector<std::vector<double>> own_costs,
            std::vector<std::vector<double>> peer_costs)
      : world_(world), own_costs_(std::move(own_costs)), peer_costs_(std::move(peer_costs)) {}

  bool available() const { return world_ != nullptr; }

  double peer_accuracy(int peer, const Context& x, double tau = 0.0) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const SyntheticArm& arm : world_->arms[static_cast<std::size_t>(peer)])
      best = std::max(best, arm.accuracy(x, tau));
    return best;
  }

  OracleChoice best_arm(int learner, const Context& x, double tau = 0.0) const {
    const auto& own = world_->arms[static_cast<std::size_t>(learner)];
    OracleChoice choice{ArmId::own(0), -std::numeric_limits<double>::infinity(), 0.0};
    for (int f = 0; f < static_cast<int>(own.size()); ++f) {
      const double acc = own[static_cast<std::size_t>(f)].accuracy(x, tau);
      const double net = acc - own_costs_[static_cast<std::size_t>(learner)][static_cast<std::size_t>(f)];
      if (net > choice.net) choice = {ArmId::own(f), net, acc};
    }
    const auto& pc = peer_costs_[static_cast<std::size_t>(learner)];
    for (int j = 0; j < static_cast<int>(pc.size()); ++j) {
      if (j == learner || !(pc[static_cast<std::size_t>(j)] < std::numeric_limits<double>::infinity()))
        continue;
      const double acc = peer_accuracy(j, x, tau);
      const double net = acc - pc[static_cast<std::size_t>(j)];
      if (net > choice.net) choice = {ArmId::peer(j), net, acc};  // ties keep own-first order
    }
    return choice;
  }

 private:
  const SyntheticWorld* world_ = nullptr;
  std::vector<std::vector<double>> own_costs_;
  std::vector<std::vector<double>> peer_costs_;
};

// Per-slot regret increments against the oracle. The expected increment
// uses the accuracy of the function actually invoked (for a peer arm, the
// function the peer picked), so realized increments are unbiased for it.
struct RegretStep {
  double expected = 0.0;
  double realized = 0.0;
};

inline RegretStep regret_step(const OracleChoice& best, double invoked_accuracy,
                              double chosen_cost, bool correct) {
  RegretStep r;
  r.expected = best.net - (invoked_accuracy - chosen_cost);
  r.realized = best.net - ((correct ? 1.0 : 0.0) - chosen_cost);
  return r;
}

}  // namespace ccb
