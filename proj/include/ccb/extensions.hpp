#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include "ccb/common.hpp"
#include "ccb/context.hpp"
#include "ccb/rng.hpp"

namespace ccb {

// Reward shaping hook g(correctness, cost) -> [-1, 1]. The default is the
// plain accuracy-indicator-minus-cost reward.
using RewardHook = std::function<double(double correct_indicator, double cost)>;

inline RewardHook default_reward_hook() {
  return [](double correct, double cost) { return correct - cost; };
}

// Label reveal process: the true label reaches the learner i.i.d. with
// probability p_r each slot.
struct LabelProcess {
  double p_r = 1.0;

  bool reveal(Rng& rng) const {
    if (p_r >= 1.0) return true;
    if (p_r <= 0.0) return false;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p_r;
  }
};

// Buffered feedback: a record enqueued at slot t with delay L is delivered
// at slot t + L, L drawn uniformly from {0, ..., L_max}. With L_max = 0 the
// buffer is a pass-through and the trace matches the no-delay run.
template <typename Record>
class DelayBuffer {
 public:
  explicit DelayBuffer(int L_max = 0) : L_max_(L_max) {}

  int L_max() const { return L_max_; }

  void enqueue(std::int64_t slot, Record rec, Rng& rng) {
    std::int64_t delay = 0;
    if (L_max_ > 0)
      delay = std::uniform_int_distribution<std::int64_t>(0, L_max_)(rng);
    pending_.push_back(Pending{slot + delay, std::move(rec)});
  }

  // Removes and returns the records due at slot t, in enqueue order.
  std::vector<Record> deliver(std::int64_t t) {
    std::vector<Record> due;
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (it->due <= t) {
        due.push_back(std::move(it->rec));
        it = pending_.erase(it);
      } else {
        ++it;
      }
    }
    return due;
  }

  std::size_t pending_count() const { return pending_.size(); }
  std::int64_t oldest_due() const {
    std::int64_t m = std::numeric_limits<std::int64_t>::max();
    for (const auto& p : pending_) m = std::min(m, p.due);
    return m;
  }

 private:
  struct Pending {
    std::int64_t due;
    Record rec;
  };
  std::deque<Pending> pending_;
  int L_max_ = 0;
};

// Ensemble layer combining the learners' per-slot predictions with a
// weighted majority rule; weights are kept globally or per context cell.
struct EnsembleConfig {
  enum class Rule { Sgd, Multiplicative };
  Rule rule = Rule::Sgd;
  bool per_cell = false;
  double alpha_w = 100.0;  // SGD step is 1/alpha_w
  double beta = 0.5;       // multiplicative down-weight for wrong learners
};

class EnsembleState {
 public:
  EnsembleState() = default;
  EnsembleState(const EnsembleConfig& cfg, int learners, std::int64_t cells)
      : cfg_(cfg), learners_(learners) {
    const std::int64_t groups = cfg_.per_cell ? cells : 1;
    weights_.assign(static_cast<std::size_t>(groups),
                    std::vector<double>(static_cast<std::size_t>(learners),
                                        1.0 / static_cast<double>(learners)));
  }

  const std::vector<double>& weights(std::int64_t cell = 0) const {
    return weights_[static_cast<std::size_t>(cfg_.per_cell ? cell : 0)];
  }

  // Weighted majority: predict 1 iff sum of weights of 1-voters >= 1/2.
  // cells[i] is the cell learner i's context fell in (ignored for global
  // weights).
  int predict(const std::vector<int>& predictions, const std::vector<std::int64_t>& cells) const {
    double s = 0.0;
    for (int i = 0; i < learners_; ++i)
      s += weight(i, cells) * predictions[static_cast<std::size_t>(i)];
    return s >= 0.5 ? 1 : 0;
  }

  void update(const std::vector<int>& predictions, const std::vector<std::int64_t>& cells,
              int true_label) {
    if (cfg_.rule == EnsembleConfig::Rule::Sgd) {
      double s = 0.0;
      for (int i = 0; i < learners_; ++i)
        s += weight(i, cells) * predictions[static_cast<std::size_t>(i)];
      const double residual = static_cast<double>(true_label) - s;
      for (int i = 0; i < learners_; ++i) {
        double& w = weight(i, cells);
        w = std::max(0.0, w + (1.0 / cfg_.alpha_w) * residual *
                              predictions[static_cast<std::size_t>(i)]);
      }
    } else {
      double total = 0.0;
      for (int i = 0; i < learners_; ++i) {
        double& w = weight(i, cells);
        if (predictions[static_cast<std::size_t>(i)] != true_label) w *= cfg_.beta;
        total += w;
      }
      if (total > 0.0) {
        for (int i = 0; i < learners_; ++i) weight(i, cells) /= total;
      }
    }
  }

 private:
  double& weight(int learner, const std::vector<std::int64_t>& cells) {
    const std::int64_t g = cfg_.per_cell ? cells[static_cast<std::size_t>(learner)] : 0;
    return weights_[static_cast<std::size_t>(g)][static_cast<std::size_t>(learner)];
  }
  double weight(int learner, const std::vector<std::int64_t>& cells) const {
    const std::int64_t g = cfg_.per_cell ? cells[static_cast<std::size_t>(learner)] : 0;
    return weights_[static_cast<std::size_t>(g)][static_cast<std::size_t>(learner)];
  }

  EnsembleConfig cfg_;
  int learners_ = 0;
  std::vector<std::vector<double>> weights_;  // [cell-or-0][learner]
};

// Context-only reply: the majority observed true label in the cell; empty
// history and exact ties answer 1.
inline int context_only_reply(std::int64_t count0, std::int64_t count1) {
  return count1 >= count0 ? 1 : 0;
}

}  // namespace ccb
