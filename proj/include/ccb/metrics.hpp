#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccb/common.hpp"

namespace ccb {

// One row per (slot, learner with an arrival).
struct SlotRecord {
  std::int64_t t = 0;
  int learner = 0;
  Phase phase = Phase::Exploitation;
  ArmId arm;
  bool correct = false;
  double cost = 0.0;
  double exp_regret = 0.0;  // NaN when no oracle is available
  double cum_exp_regret = 0.0;
  std::string cell;  // cell / cube id, event-log detail for audits
  // audit-only, not serialized: the under-explored set's emptiness before
  // the slot and after its counter refresh
  bool set_empty_pre = false;
  bool set_empty_post = false;
};

struct RunMetrics {
  std::vector<SlotRecord> rows;
  // cumulative expected regret series per learner, indexed by slot (1-based t
  // maps to index t-1); slots without arrivals repeat the previous value
  std::vector<std::vector<double>> cum_expected;
  std::vector<std::vector<double>> cum_realized;

  static constexpr const char* kMetricsHeader =
      "t,learner,phase,arm,correct,cost,exp_regret,cum_exp_regret";

  void write_metrics_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path);
    out << kMetricsHeader << '\n';
    std::ostringstream ss;
    ss.precision(10);
    for (const SlotRecord& r : rows) {
      ss.str("");
      ss << r.t << ',' << r.learner << ',' << to_string(r.phase) << ','
         << (r.phase == Phase::Aborted ? std::string("none") : r.arm.label()) << ','
         << (r.correct ? 1 : 0) << ',' << r.cost << ',' << r.exp_regret << ','
         << r.cum_exp_regret;
      out << ss.str() << '\n';
    }
  }
};

// Aggregates in the shape of the paper's result tables: error, training and
// exploration percentages plus per-arm selection shares outside forced
// phases.
struct LearnerSummary {
  int learner = 0;
  std::int64_t slots = 0;
  double error_pct = 0.0;
  double training_pct = 0.0;
  double exploration_pct = 0.0;
  double exploitation_pct = 0.0;
  std::map<std::string, double> selection_pct;  // exploitation-only shares
  double final_cum_expected = 0.0;
  double final_cum_realized = 0.0;
  std::optional<double> regret_slope;
};

inline std::optional<double> slope_fit(const std::vector<double>& cum_regret);

inline std::vector<LearnerSummary> finalize_report(const RunMetrics& m, int learners) {
  std::vector<LearnerSummary> out(static_cast<std::size_t>(learners));
  std::vector<std::map<std::string, std::int64_t>> exploit_counts(
      static_cast<std::size_t>(learners));
  std::vector<std::int64_t> errors(static_cast<std::size_t>(learners), 0);
  std::vector<std::int64_t> phase_counts(static_cast<std::size_t>(learners) * 3, 0);
  for (const SlotRecord& r : m.rows) {
    auto& s = out[static_cast<std::size_t>(r.learner)];
    s.slots += 1;
    if (!r.correct) errors[static_cast<std::size_t>(r.learner)] += 1;
    switch (r.phase) {
      case Phase::Training: phase_counts[static_cast<std::size_t>(r.learner) * 3 + 0] += 1; break;
      case Phase::Exploration: phase_counts[static_cast<std::size_t>(r.learner) * 3 + 1] += 1; break;
      case Phase::Exploitation:
        phase_counts[static_cast<std::size_t>(r.learner) * 3 + 2] += 1;
        exploit_counts[static_cast<std::size_t>(r.learner)][r.arm.label()] += 1;
        break;
      case Phase::Aborted: break;
    }
  }
  for (int i = 0; i < learners; ++i) {
    auto& s = out[static_cast<std::size_t>(i)];
    s.learner = i;
    if (s.slots > 0) {
      const double n = static_cast<double>(s.slots);
      s.error_pct = 100.0 * static_cast<double>(errors[static_cast<std::size_t>(i)]) / n;
      s.training_pct = 100.0 * static_cast<double>(phase_counts[static_cast<std::size_t>(i) * 3 + 0]) / n;
      s.exploration_pct = 100.0 * static_cast<double>(phase_counts[static_cast<std::size_t>(i) * 3 + 1]) / n;
      s.exploitation_pct = 100.0 * static_cast<double>(phase_counts[static_cast<std::size_t>(i) * 3 + 2]) / n;
    }
    const double n_exploit =
        static_cast<double>(phase_counts[static_cast<std::size_t>(i) * 3 + 2]);
    for (const auto& [arm, count] : exploit_counts[static_cast<std::size_t>(i)])
      s.selection_pct[arm] = n_exploit > 0 ? 100.0 * static_cast<double>(count) / n_exploit : 0.0;
    if (i < static_cast<int>(m.cum_expected.size()) && !m.cum_expected[static_cast<std::size_t>(i)].empty()) {
      s.final_cum_expected = m.cum_expected[static_cast<std::size_t>(i)].back();
      s.final_cum_realized = m.cum_realized[static_cast<std::size_t>(i)].back();
      s.regret_slope = slope_fit(m.cum_expected[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

// Least-squares slope of log cumulative regret vs log t over the last 90%
// of the series. Nonpositive values are skipped; fewer than 10 usable
// points yields no estimate.
inline std::optional<double> slope_fit(const std::vector<double>& cum_regret) {
  const std::int64_t T = static_cast<std::int64_t>(cum_regret.size());
  const std::int64_t burn_in = T / 10;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::int64_t n = 0;
  for (std::int64_t t = burn_in + 1; t <= T; ++t) {
    const double r = cum_regret[static_cast<std::size_t>(t - 1)];
    if (!(r > 0.0)) continue;
    const double lx = std::log(static_cast<double>(t));
    const double ly = std::log(r);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 10) return std::nullopt;
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  if (denom == 0.0) return std::nullopt;
  return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

// Long-form summary file: learner,metric,value with fixed header.
inline void write_summary_csv(const std::vector<LearnerSummary>& summaries,
                              const std::string& path,
                              const std::vector<std::pair<std::string, double>>& extras = {}) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path);
  out << "learner,metric,value\n";
  out.precision(10);
  for (const LearnerSummary& s : summaries) {
    out << s.learner << ",slots," << s.slots << '\n';
    out << s.learner << ",error_pct," << s.error_pct << '\n';
    out << s.learner << ",training_pct," << s.training_pct << '\n';
    out << s.learner << ",exploration_pct," << s.exploration_pct << '\n';
    out << s.learner << ",exploitation_pct," << s.exploitation_pct << '\n';
    out << s.learner << ",final_cum_expected_regret," << s.final_cum_expected << '\n';
    out << s.learner << ",final_cum_realized_regret," << s.final_cum_realized << '\n';
    if (s.regret_slope) out << s.learner << ",regret_slope," << *s.regret_slope << '\n';
    for (const auto& [arm, pct] : s.selection_pct)
      out << s.learner << ",selection_pct_" << arm << ',' << pct << '\n';
  }
  for (const auto& [metric, value] : extras) out << -1 << ',' << metric << ',' << value << '\n';
}

}  // namespace ccb
