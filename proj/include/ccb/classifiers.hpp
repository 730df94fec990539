#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <variant>
#include <vector>

#include "ccb/common.hpp"
#include "ccb/rng.hpp"

namespace ccb {

// From-scratch trainable base classifiers. Predictions are deterministic
// given internal state except RandomCoin; score ties at 0.5 predict 1.

struct ConstantClassifier {
  int label = 1;
};

struct RandomCoinClassifier {};

// Online Gaussian naive Bayes with running per-class feature moments.
// Variances are floored at 1e-9.
class GaussianNaiveBayes {
 public:
  static constexpr double kVarFloor = 1e-9;

  void update(const std::vector<double>& features, int label) {
    ensure_dim(static_cast<int>(features.size()));
    ClassStats& cs = stats_[label];
    cs.count += 1;
    for (std::size_t f = 0; f < features.size(); ++f) {
      // Welford running moments
      const double delta = features[f] - cs.mean[f];
      cs.mean[f] += delta / static_cast<double>(cs.count);
      cs.m2[f] += delta * (features[f] - cs.mean[f]);
    }
  }

  int predict(const std::vector<double>& features) const {
    if (dim_ < 0) return 1;  // untrained: tie rule
    if (static_cast<int>(features.size()) != dim_)
      throw ConfigError("GaussianNaiveBayes: feature dimension mismatch");
    const std::int64_t total = stats_[0].count + stats_[1].count;
    if (total == 0) return 1;
    double score[2];
    for (int c = 0; c < 2; ++c) {
      const ClassStats& cs = stats_[c];
      if (cs.count == 0) {
        score[c] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double s = std::log(static_cast<double>(cs.count) / static_cast<double>(total));
      for (std::size_t f = 0; f < features.size(); ++f) {
        const double var = std::max(cs.m2[f] / static_cast<double>(cs.count), kVarFloor);
        const double diff = features[f] - cs.mean[f];
        s += -0.5 * std::log(2.0 * M_PI * var) - diff * diff / (2.0 * var);
      }
      score[c] = s;
    }
    return score[1] >= score[0] ? 1 : 0;
  }

  std::int64_t class_count(int label) const { return stats_[label].count; }

 private:
  struct ClassStats {
    std::int64_t count = 0;
    std::vector<double> mean;
    std::vector<double> m2;
  };

  void ensure_dim(int d) {
    if (dim_ < 0) {
      dim_ = d;
      for (ClassStats& cs : stats_) {
        cs.mean.assign(static_cast<std::size_t>(d), 0.0);
        cs.m2.assign(static_cast<std::size_t>(d), 0.0);
      }
    } else if (d != dim_) {
      throw ConfigError("GaussianNaiveBayes: feature dimension mismatch");
    }
  }

  int dim_ = -1;
  ClassStats stats_[2];
};

// Plain online logistic regression, one SGD step per labeled sample:
// w += rate * (label - sigmoid(w.x)) * x. No intercept term.
struct OnlineLogistic {
  std::vector<double> weights;
  double rate = 0.05;

  static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  double score(const std::vector<double>& features) const {
    if (!weights.empty() && weights.size() != features.size())
      throw ConfigError("OnlineLogistic: feature dimension mismatch");
    double dot = 0.0;
    for (std::size_t f = 0; f < weights.size(); ++f) dot += weights[f] * features[f];
    return sigmoid(dot);
  }

  int predict(const std::vector<double>& features) const {
    return score(features) >= 0.5 ? 1 : 0;
  }

  void update(const std::vector<double>& features, int label) {
    if (weights.empty()) weights.assign(features.size(), 0.0);
    const double residual = static_cast<double>(label) - score(features);
    for (std::size_t f = 0; f < features.size(); ++f)
      weights[f] += rate * residual * features[f];
  }
};

struct DecisionStump {
  int feature = 0;
  double threshold = 0.0;
  int polarity = 1;  // 1: predict 1 when value > threshold; -1: inverted

  int predict(const std::vector<double>& features) const {
    if (feature < 0 || feature >= static_cast<int>(features.size()))
      throw ConfigError("DecisionStump: feature index out of range");
    const bool above = features[static_cast<std::size_t>(feature)] > threshold;
    return (polarity >= 0) == above ? 1 : 0;
  }
};

using BaseClassifier = std::variant<ConstantClassifier, RandomCoinClassifier,
                                    GaussianNaiveBayes, OnlineLogistic, DecisionStump>;

inline int classifier_predict(const BaseClassifier& c, const std::vector<double>& features,
                              Rng& rng) {
  return std::visit(
      [&](const auto& impl) -> int {
        using T = std::decay_t<decltype(impl)>;
        if constexpr (std::is_same_v<T, ConstantClassifier>) {
          return impl.label;
        } else if constexpr (std::is_same_v<T, RandomCoinClassifier>) {
          return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5 ? 0 : 1;
        } else {
          return impl.predict(features);
        }
      },
      c);
}

inline void classifier_update(BaseClassifier& c, const std::vector<double>& features, int label) {
  if (label != 0 && label != 1) throw ConfigError("classifier_update: label must be 0 or 1");
  std::visit(
      [&](auto& impl) {
        using T = std::decay_t<decltype(impl)>;
        if constexpr (std::is_same_v<T, GaussianNaiveBayes> || std::is_same_v<T, OnlineLogistic>) {
          impl.update(features, label);
        }
        // constant / coin / stump kinds do not learn
      },
      c);
}

}  // namespace ccb
