#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ccb/common.hpp"
#include "ccb/context.hpp"
#include "ccb/rng.hpp"

namespace ccb {

// Synthetic accuracy oracle: pi(x) = clamp(0.5 + a sin(2pi (w.x + phase)),
// clip_lo, clip_hi). Inside the clip band the map is Lipschitz with constant
// 2*pi*a*||w|| and exponent 1, which certifies the similarity assumption the
// policies rely on. An optional drift rate shifts the phase with normalized
// time tau = t/T; the time-Lipschitz constant is then 2*pi*a*drift_rate.
struct SyntheticArm {
  double amplitude = 0.4;
  std::vector<double> frequency = {1.0};
  double phase = 0.0;
  double clip_lo = 0.05;
  double clip_hi = 0.95;
  double drift_rate = 0.0;

  double lipschitz_constant() const {
    double norm = 0.0;
    for (double w : frequency) norm += w * w;
    return 2.0 * M_PI * amplitude * std::sqrt(norm);
  }

  double accuracy(const Context& x, double tau = 0.0) const {
    if (x.dim() != static_cast<int>(frequency.size()))
      throw ConfigError("synthetic_accuracy: context dimension mismatch");
    double dot = phase + drift_rate * tau;
    for (int a = 0; a < x.dim(); ++a) dot += frequency[static_cast<std::size_t>(a)] * x[a];
    const double v = 0.5 + amplitude * std::sin(2.0 * M_PI * dot);
    return std::clamp(v, clip_lo, clip_hi);
  }

  // Emits the true label with probability accuracy(x), else its complement.
  // Consumes exactly one draw.
  int predict(const Context& x, int true_label, Rng& rng, double tau = 0.0) const {
    const double pi = accuracy(x, tau);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return u < pi ? true_label : 1 - true_label;
  }
};

// Undirected weighted learner graph. Peer costs are the sums along
// lowest-cost paths; unreachable pairs get +inf and are excluded from the
// arm set. Path sums above 1 are kept: such peers are simply never optimal.
struct LearnerTopology {
  int learners = 0;
  struct Edge {
    int a, b;
    double w;
  };
  std::vector<Edge> edges;
};

inline std::vector<std::vector<double>> path_costs(const LearnerTopology& topo) {
  const int n = topo.learners;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(n),
                                        std::vector<double>(static_cast<std::size_t>(n), inf));
  for (int i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0.0;
  for (const auto& e : topo.edges) {
    if (e.w < 0.0) throw ConfigError("path_costs: negative edge weight");
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n)
      throw ConfigError("path_costs: edge endpoint out of range");
    auto& da = dist[static_cast<std::size_t>(e.a)][static_cast<std::size_t>(e.b)];
    auto& db = dist[static_cast<std::size_t>(e.b)][static_cast<std::size_t>(e.a)];
    da = std::min(da, e.w);
    db = std::min(db, e.w);
  }
  // Floyd-Warshall; M is small
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double via = dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] +
                           dist[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        if (via < dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
          dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = via;
      }
  return dist;
}

}  // namespace ccb
