#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ccb/classifiers.hpp"
#include "ccb/config.hpp"
#include "ccb/context.hpp"
#include "ccb/control.hpp"
#include "ccb/dataset.hpp"
#include "ccb/environment.hpp"
#include "ccb/extensions.hpp"
#include "ccb/metrics.hpp"
#include "ccb/oracle.hpp"
#include "ccb/policy_cos.hpp"
#include "ccb/policy_cosmc.hpp"
#include "ccb/policy_dcza.hpp"
#include "ccb/rng.hpp"

namespace ccb {

struct ArmBackend {
  bool is_synthetic = true;
  SyntheticArm synthetic;
  BaseClassifier classifier;
};

// Everything a learner knows and owns during a run. Policy state is
// confined to one learner; peers interact only through the synchronous
// within-slot request/response calls below.
struct LearnerRuntime {
  int index = 0;
  std::vector<ArmBackend> functions;
  std::vector<double> own_costs;
  std::vector<double> peer_costs;  // by learner index, +inf for non-arms
  std::vector<ArmId> arms;
  int own_count = 0;
  bool unsupervised = false;

  std::optional<CosState> cos;
  std::optional<DczaState> dcza;
  std::optional<McState> mc;

  LabelProcess reveal;
  Rng pred_rng, reveal_rng, delay_rng, policy_rng;

  // Served requests waiting for the caller to forward the true label.
  struct PendingServe {
    Context x;
    int function_slot = 0;
    Phase own_phase = Phase::Exploration;
    std::int64_t cell = 0;
    CubeId cube;
    int prediction = 0;
    std::vector<double> features;
  };
  std::map<std::int64_t, PendingServe> pending;
  std::int64_t next_pending_id = 0;

  double cost_of(const ArmId& a) const {
    return a.is_own() ? own_costs[static_cast<std::size_t>(a.index)]
                      : peer_costs[static_cast<std::size_t>(a.index)];
  }
};

// One selected-and-predicted slot item, staged until its label resolves.
struct SlotOutcome {
  std::int64_t t = 0;
  int learner = 0;
  Context x;
  int true_label = 0;
  std::vector<double> features;
  ArmId arm;
  Phase phase = Phase::Exploitation;
  int dim = 0;
  std::int64_t cell = 0;
  CubeId cube;
  int prediction = 0;
  double cost = 0.0;
  int invoked_function = -1;
  int peer = -1;
  std::int64_t peer_pending = -1;
  bool no_updates = false;  // unsupervised caller: nothing to record
  double exp_regret = std::numeric_limits<double>::quiet_NaN();
  bool set_empty_pre = false;
  bool set_empty_post = false;
};

struct SimResult {
  RunMetrics metrics;
  std::vector<LearnerSummary> summaries;
  std::vector<std::pair<std::string, double>> extras;
};

class Simulation {
 public:
  explicit Simulation(RunConfig cfg) : cfg_(std::move(cfg)) { build(); }

  // Test hook: peer queries issued by `learner` at slot `t` fail.
  void inject_peer_fault(int learner, std::int64_t t) { faults_.insert({learner, t}); }
  void set_reward_hook(RewardHook hook) { hook_ = std::move(hook); }

  const RunConfig& config() const { return cfg_; }
  const LearnerRuntime& learner(int i) const { return learners_[static_cast<std::size_t>(i)]; }
  const OracleMap& oracle() const { return oracle_; }
  const SyntheticWorld& world() const { return world_; }
  std::int64_t horizon() const { return T_; }

  SimResult run() {
    SimResult res;
    const int M = cfg_.learner_count();
    res.metrics.cum_expected.assign(static_cast<std::size_t>(M), {});
    res.metrics.cum_realized.assign(static_cast<std::size_t>(M), {});
    for (auto& v : res.metrics.cum_expected) v.reserve(static_cast<std::size_t>(T_));
    for (auto& v : res.metrics.cum_realized) v.reserve(static_cast<std::size_t>(T_));
    std::vector<double> run_exp(static_cast<std::size_t>(M), 0.0);
    std::vector<double> run_real(static_cast<std::size_t>(M), 0.0);

    std::int64_t ens_errors = 0, ens_exploit_slots = 0, ens_exploit_errors = 0;

    for (std::int64_t t = 1; t <= T_; ++t) {
      std::vector<SlotOutcome> staged;
      staged.reserve(static_cast<std::size_t>(M * cfg_.ext.batch));

      // events i-ii: arrivals, selections, predictions (counters frozen;
      // updates wait for event iii)
      for (int b = 0; b < cfg_.ext.batch; ++b) {
        auto arrivals = draw_arrivals(t);
        for (int i = 0; i < M; ++i) {
          if (!arrivals[static_cast<std::size_t>(i)]) continue;
          auto& arr = *arrivals[static_cast<std::size_t>(i)];
          SlotOutcome o = select_and_predict(i, t, arr.x, arr.label, arr.features);
          accumulate_regret(o, t, run_exp, run_real);
          if (!cfg_.synthetic()) record_counterfactuals(o);
          staged.push_back(std::move(o));
        }
        if (ensemble_) {
          const bool all_exploit = track_ensemble(staged, M, ens_errors);
          if (all_exploit) {
            ++ens_exploit_slots;
            if (ens_last_wrong_) ++ens_exploit_errors;
          }
        }
      }

      // event iii: label reveals feed the delay buffers
      for (const SlotOutcome& o : staged) {
        if (o.phase == Phase::Aborted) continue;
        LearnerRuntime& L = learners_[static_cast<std::size_t>(o.learner)];
        if (o.no_updates || !L.reveal.reveal(L.reveal_rng)) {
          if (o.peer_pending >= 0)
            learners_[static_cast<std::size_t>(o.peer)].pending.erase(o.peer_pending);
          continue;
        }
        delay_[static_cast<std::size_t>(o.learner)].enqueue(t, o, L.delay_rng);
      }

      // event iv: matured labels update the caller and are forwarded to the
      // chosen peer
      for (int i = 0; i < M; ++i) {
        for (SlotOutcome& rec : delay_[static_cast<std::size_t>(i)].deliver(t))
          apply_labeled_outcome(rec);
      }

      // end-of-slot zooming on the learner's own arrivals
      for (const SlotOutcome& o : staged) {
        if (o.phase == Phase::Aborted) continue;
        LearnerRuntime& L = learners_[static_cast<std::size_t>(o.learner)];
        if (L.dcza) L.dcza->after_slot(o.x);
      }

      for (SlotOutcome& o : staged) {
        writeback_row(res.metrics, o, run_exp);
      }
      for (int i = 0; i < M; ++i) {
        res.metrics.cum_expected[static_cast<std::size_t>(i)].push_back(
            run_exp[static_cast<std::size_t>(i)]);
        res.metrics.cum_realized[static_cast<std::size_t>(i)].push_back(
            run_real[static_cast<std::size_t>(i)]);
      }
    }

    res.summaries = finalize_report(res.metrics, M);
    if (ensemble_ && T_ > 0) {
      res.extras.emplace_back("ensemble_error_pct",
                              100.0 * static_cast<double>(ens_errors) / static_cast<double>(T_));
      if (ens_exploit_slots > 0)
        res.extras.emplace_back("ensemble_exploit_error_pct",
                                100.0 * static_cast<double>(ens_exploit_errors) /
                                    static_cast<double>(ens_exploit_slots));
    }
    if (!cfg_.synthetic()) add_pseudo_regret(res);
    return res;
  }

 private:
  struct ArrivalItem {
    Context x;
    int label;
    std::vector<double> features;
  };

  void build() {
    const int M = cfg_.learner_count();
    if (M < 1) throw ConfigError("config: at least one learner required");

    // backends and world
    world_.eta = cfg_.env.eta;
    for (int i = 0; i < M; ++i) {
      const LearnerConfig& lc = cfg_.learners[static_cast<std::size_t>(i)];
      std::vector<SyntheticArm> world_arms;
      for (const FunctionSpec& fs : lc.functions) {
        if (cfg_.synthetic()) {
          if (fs.kind != FunctionSpec::Kind::Synthetic)
            throw ConfigError("synthetic runs need synthetic functions (learner " +
                              std::to_string(i) + ")");
          if (static_cast<int>(fs.synthetic.frequency.size()) != cfg_.effective_dim())
            throw ConfigError("synthetic arm frequency vector must have " +
                              std::to_string(cfg_.effective_dim()) + " entries");
          world_arms.push_back(fs.synthetic);
        } else if (fs.kind == FunctionSpec::Kind::Synthetic) {
          throw ConfigError("dataset runs need classifier functions (learner " +
                            std::to_string(i) + ")");
        }
      }
      world_.arms.push_back(std::move(world_arms));
    }

    if (!cfg_.synthetic()) load_dataset();
    T_ = cfg_.T;
    if (!cfg_.synthetic()) T_ = std::min<std::int64_t>(T_, static_cast<std::int64_t>(test_rows_));

    const int d_eff = cfg_.synthetic() ? cfg_.effective_dim() : 1;

    std::vector<std::vector<double>> oracle_own_costs;
    for (int i = 0; i < M; ++i) {
      const LearnerConfig& lc = cfg_.learners[static_cast<std::size_t>(i)];
      LearnerRuntime L;
      L.index = i;
      L.own_costs = lc.own_costs;
      oracle_own_costs.push_back(lc.own_costs);
      L.peer_costs = cfg_.resolved_peer_costs[static_cast<std::size_t>(i)];
      L.own_count = static_cast<int>(lc.functions.size());
      for (int f = 0; f < L.own_count; ++f) {
        ArmBackend b;
        const FunctionSpec& fs = lc.functions[static_cast<std::size_t>(f)];
        b.is_synthetic = fs.kind == FunctionSpec::Kind::Synthetic;
        if (b.is_synthetic) b.synthetic = fs.synthetic;
        else b.classifier = fs.make_classifier();
        L.functions.push_back(std::move(b));
        L.arms.push_back(ArmId::own(f));
      }
      // ensemble mode restricts every learner to its own functions
      if (!cfg_.ext.ensemble) {
        for (int j = 0; j < M; ++j) {
          if (j == i) continue;
          if (std::isfinite(L.peer_costs[static_cast<std::size_t>(j)]))
            L.arms.push_back(ArmId::peer(j));
        }
      }
      switch (cfg_.policy.kind) {
        case PolicyConfig::Kind::Cos:
          L.cos.emplace(UniformPartition(cfg_.resolved_m_T, d_eff), L.arms, L.own_count);
          break;
        case PolicyConfig::Kind::Dcza:
          L.dcza.emplace(d_eff, cfg_.policy.A, cfg_.resolved_p, L.arms, L.own_count,
                         cfg_.policy.child_memory, cfg_.policy.split_strict);
          break;
        case PolicyConfig::Kind::CosMc:
          L.mc.emplace(d_eff, cfg_.resolved_m_T, L.arms, L.own_count);
          break;
      }
      L.reveal.p_r = cfg_.resolved_p_r[static_cast<std::size_t>(i)];
      L.unsupervised = cfg_.ext.unsupervised.count(i) > 0;
      L.pred_rng = make_stream(cfg_.seed, Stream::Prediction, static_cast<std::uint64_t>(i));
      L.reveal_rng = make_stream(cfg_.seed, Stream::Reveal, static_cast<std::uint64_t>(i));
      L.delay_rng = make_stream(cfg_.seed, Stream::Delay, static_cast<std::uint64_t>(i));
      L.policy_rng = make_stream(cfg_.seed, Stream::Policy, static_cast<std::uint64_t>(i));
      learners_.push_back(std::move(L));
      delay_.emplace_back(cfg_.ext.L_max);
    }

    if (cfg_.synthetic())
      oracle_ = OracleMap(&world_, std::move(oracle_own_costs), cfg_.resolved_peer_costs);

    // context streams
    if (cfg_.synthetic()) {
      ArrivalConfig ac = cfg_.env.arrival;
      if (ac.kind == ArrivalConfig::Kind::Best &&
          cfg_.policy.kind == PolicyConfig::Kind::Dcza)
        ac.best_p = cfg_.resolved_p;
      switch (ac.correlation) {
        case ArrivalConfig::Correlation::Best:
          shared_stream_.emplace(ac, cfg_.env.d, T_, make_stream(cfg_.seed, Stream::Shared));
          break;
        case ArrivalConfig::Correlation::Independent:
          for (int i = 0; i < M; ++i)
            learner_streams_.emplace_back(ac, cfg_.env.d, T_,
                                          make_stream(cfg_.seed, Stream::Environment,
                                                      static_cast<std::uint64_t>(i)));
          break;
        case ArrivalConfig::Correlation::Worst:
          shared_stream_.emplace(ac, cfg_.env.d, T_,
                                 make_stream(cfg_.seed, Stream::Environment,
                                             static_cast<std::uint64_t>(ac.designated)));
          break;
      }
    }

    if (cfg_.ext.ensemble) {
      if (cfg_.synthetic() &&
          cfg_.env.arrival.correlation != ArrivalConfig::Correlation::Best)
        throw ConfigError("ensemble mode needs best-case correlation (one shared instance)");
      std::int64_t cells = 1;
      for (int a = 0; a < d_eff; ++a) cells *= cfg_.resolved_m_T;
      ensemble_.emplace(*cfg_.ext.ensemble, M, cells);
      ens_reveal_.p_r = cfg_.ext.p_r;
      ens_reveal_rng_ = make_stream(cfg_.seed, Stream::Reveal, 0xE25EEDULL);
    }
  }

  void load_dataset() {
    const DatasetConfig& dc = *cfg_.env.dataset;
    Dataset all = load_csv(dc.path, dc.schema);
    const std::int64_t train = std::min<std::int64_t>(dc.train_rows,
                                                      static_cast<std::int64_t>(all.size()));
    const std::int64_t test =
        std::min<std::int64_t>(dc.test_rows, static_cast<std::int64_t>(all.size()) - train);
    if (test <= 0) throw ConfigError("dataset: no rows left for the test stream");
    test_.feature_names = all.feature_names;
    test_.provenance = all.provenance;
    for (std::int64_t r = train; r < train + test; ++r) {
      test_.features.push_back(all.features[static_cast<std::size_t>(r)]);
      test_.labels.push_back(all.labels[static_cast<std::size_t>(r)]);
    }
    test_rows_ = static_cast<std::int64_t>(test_.size());
    extractor_ = ContextExtractor(dc.context, test_, std::min<std::int64_t>(cfg_.T, test_rows_));
    // context values are fixed before features are standardized
    contexts_.reserve(static_cast<std::size_t>(test_rows_));
    for (std::int64_t t = 1; t <= test_rows_; ++t) contexts_.push_back(extractor_.at(t, test_));

    if (dc.standardize) {
      const int F = all.feature_dim();
      std::vector<double> mu(static_cast<std::size_t>(F), 0.0), sd(static_cast<std::size_t>(F), 0.0);
      for (std::int64_t r = 0; r < train; ++r)
        for (int f = 0; f < F; ++f) mu[static_cast<std::size_t>(f)] += all.features[static_cast<std::size_t>(r)][static_cast<std::size_t>(f)];
      for (int f = 0; f < F; ++f) mu[static_cast<std::size_t>(f)] /= std::max<std::int64_t>(train, 1);
      for (std::int64_t r = 0; r < train; ++r)
        for (int f = 0; f < F; ++f) {
          const double dvi = all.features[static_cast<std::size_t>(r)][static_cast<std::size_t>(f)] - mu[static_cast<std::size_t>(f)];
          sd[static_cast<std::size_t>(f)] += dvi * dvi;
        }
      for (int f = 0; f < F; ++f)
        sd[static_cast<std::size_t>(f)] = std::sqrt(sd[static_cast<std::size_t>(f)] / std::max<std::int64_t>(train, 1)) + 1e-9;
      auto standardize = [&](std::vector<double>& row) {
        for (int f = 0; f < F; ++f)
          row[static_cast<std::size_t>(f)] =
              (row[static_cast<std::size_t>(f)] - mu[static_cast<std::size_t>(f)]) / sd[static_cast<std::size_t>(f)];
      };
      for (auto& row : test_.features) standardize(row);
      if (dc.pretrain) {
        pretrain_rows_.reserve(static_cast<std::size_t>(train));
        for (std::int64_t r = 0; r < train; ++r) {
          auto row = all.features[static_cast<std::size_t>(r)];
          standardize(row);
          pretrain_rows_.emplace_back(std::move(row), all.labels[static_cast<std::size_t>(r)]);
        }
      }
    } else if (dc.pretrain) {
      for (std::int64_t r = 0; r < train; ++r)
        pretrain_rows_.emplace_back(all.features[static_cast<std::size_t>(r)],
                                    all.labels[static_cast<std::size_t>(r)]);
    }
    pretrain_pending_ = dc.pretrain;
  }

  void pretrain_classifiers() {
    for (LearnerRuntime& L : learners_)
      for (ArmBackend& b : L.functions)
        for (const auto& [row, label] : pretrain_rows_) classifier_update(b.classifier, row, label);
    pretrain_rows_.clear();
    pretrain_pending_ = false;
  }

  std::vector<std::optional<ArrivalItem>> draw_arrivals(std::int64_t t) {
    const int M = cfg_.learner_count();
    std::vector<std::optional<ArrivalItem>> out(static_cast<std::size_t>(M));
    if (!cfg_.synthetic()) {
      if (pretrain_pending_) pretrain_classifiers();
      ArrivalItem item;
      item.x = contexts_[static_cast<std::size_t>(t - 1)];
      item.label = test_.labels[static_cast<std::size_t>(t - 1)];
      item.features = test_.features[static_cast<std::size_t>(t - 1)];
      for (int i = 0; i < M; ++i) out[static_cast<std::size_t>(i)] = item;
      return out;
    }
    auto finish = [&](ContextStream& cs) {
      ArrivalItem item;
      item.x = cs.next(t);
      item.label = draw_label(world_.eta, item.x, cs.rng());
      if (cfg_.env.append_time)
        item.x.coords.push_back(static_cast<double>(t) / static_cast<double>(T_));
      return item;
    };
    switch (cfg_.env.arrival.correlation) {
      case ArrivalConfig::Correlation::Best: {
        ArrivalItem item = finish(*shared_stream_);
        for (int i = 0; i < M; ++i) out[static_cast<std::size_t>(i)] = item;
        break;
      }
      case ArrivalConfig::Correlation::Independent: {
        for (int i = 0; i < M; ++i)
          out[static_cast<std::size_t>(i)] = finish(learner_streams_[static_cast<std::size_t>(i)]);
        break;
      }
      case ArrivalConfig::Correlation::Worst: {
        out[static_cast<std::size_t>(cfg_.env.arrival.designated)] = finish(*shared_stream_);
        break;
      }
    }
    return out;
  }

  double tau(std::int64_t t) const {
    return T_ > 0 ? static_cast<double>(t) / static_cast<double>(T_) : 0.0;
  }

  // Own-function invocation on the given learner.
  int invoke_function(LearnerRuntime& L, int f, const Context& x, int true_label,
                      const std::vector<double>& features, std::int64_t t) {
    ArmBackend& b = L.functions[static_cast<std::size_t>(f)];
    if (b.is_synthetic) return b.synthetic.predict(x, true_label, L.pred_rng, tau(t));
    return classifier_predict(b.classifier, features, L.pred_rng);
  }

  // Peer-side service: the callee picks one of its own functions with its
  // own explore-then-exploit rule, predicts, and remembers the request until
  // the caller forwards the label.
  std::tuple<int, int, std::int64_t> serve_peer_request(int callee, const Context& x,
                                                        int true_label,
                                                        const std::vector<double>& features,
                                                        std::int64_t t, const ControlValues& D,
                                                        bool caller_keeps_label) {
    LearnerRuntime& C = learners_[static_cast<std::size_t>(callee)];
    int slot;
    Phase own_phase;
    LearnerRuntime::PendingServe ps;
    if (C.cos) {
      std::tie(slot, own_phase) = C.cos->select_own(x, D);
      ps.cell = C.cos->cell_of(x);
    } else if (C.dcza) {
      std::tie(slot, own_phase) = C.dcza->select_own(x, D);
      ps.cube = C.dcza->locate(x);
    } else {
      std::tie(slot, own_phase) = C.mc->select_own(x, D);
    }
    const int pred = invoke_function(C, slot, x, true_label, features, t);
    std::int64_t id = -1;
    if (caller_keeps_label) {
      id = C.next_pending_id++;
      ps.x = x;
      ps.function_slot = slot;
      ps.own_phase = own_phase;
      ps.prediction = pred;
      ps.features = features;
      C.pending.emplace(id, std::move(ps));
    }
    return {pred, slot, id};
  }

  // Unsupervised caller: peers report the sample mean of their estimated
  // best own function for the cell of x; the caller picks the overall best
  // with no state update of its own.
  std::optional<double> peer_report(const LearnerRuntime& C, const Context& x) const {
    auto best_own = [&](const CellStats& cs, int own_count) -> std::optional<double> {
      std::optional<double> best;
      for (int s = 0; s < own_count; ++s) {
        const ArmStats& a = cs.arms[static_cast<std::size_t>(s)];
        if (a.n > 0 && (!best || a.mean > *best)) best = a.mean;
      }
      return best;
    };
    if (C.cos) return best_own(C.cos->cell(C.cos->cell_of(x)), C.own_count);
    if (C.dcza) return best_own(C.dcza->cube_stats(C.dcza->locate(x)), C.own_count);
    std::optional<double> best;
    for (int m = 0; m < C.mc->dims(); ++m) {
      const CosState& sub = C.mc->sub(m);
      auto v = best_own(sub.cell(sub.cell_of(McState::coordinate(x, m))), C.own_count);
      if (v && (!best || *v > *best)) best = v;
    }
    return best;
  }

  SlotOutcome select_and_predict(int i, std::int64_t t, const Context& x, int true_label,
                                 const std::vector<double>& features) {
    LearnerRuntime& L = learners_[static_cast<std::size_t>(i)];
    const ControlValues D = control_values(t, cfg_.controls);
    SlotOutcome o;
    o.t = t;
    o.learner = i;
    o.x = x;
    o.true_label = true_label;
    o.features = features;

    try {
      if (L.unsupervised) {
        o.no_updates = true;
        o.phase = Phase::Exploitation;
        // own sample means (0 until ever updated) vs peer reports
        double best = -std::numeric_limits<double>::infinity();
        ArmId best_arm = ArmId::own(0);
        const CellStats* cs = nullptr;
        std::int64_t cell = 0;
        if (L.cos) {
          cell = L.cos->cell_of(x);
          cs = &L.cos->cell(cell);
        } else if (L.dcza) {
          o.cube = L.dcza->locate(x);
          cs = &L.dcza->cube_stats(o.cube);
        } else {
          cell = L.mc->sub(0).cell_of(McState::coordinate(x, 0));
          cs = &L.mc->sub(0).cell(cell);
        }
        o.cell = cell;
        for (int s = 0; s < L.own_count; ++s) {
          const double v = cs->arms[static_cast<std::size_t>(s)].mean;
          if (v > best) {
            best = v;
            best_arm = L.arms[static_cast<std::size_t>(s)];
          }
        }
        for (int s = L.own_count; s < static_cast<int>(L.arms.size()); ++s) {
          const int peer = L.arms[static_cast<std::size_t>(s)].index;
          auto rep = peer_report(learners_[static_cast<std::size_t>(peer)], x);
          if (rep && *rep > best) {
            best = *rep;
            best_arm = L.arms[static_cast<std::size_t>(s)];
          }
        }
        o.arm = best_arm;
      } else if (L.cos) {
        CosSelection s = L.cos->select(x, t, D, [&](int peer) -> std::optional<std::int64_t> {
          check_fault(i, t);
          const LearnerRuntime& P = learners_[static_cast<std::size_t>(peer)];
          return P.cos->arrival_count(P.cos->cell_of(x));
        });
        o.arm = s.arm;
        o.phase = s.phase;
        o.cell = s.cell;
        o.set_empty_pre = s.set_empty_pre;
        o.set_empty_post = s.set_empty_post;
      } else if (L.dcza) {
        const CubeId cube = L.dcza->locate(x);
        DczaSelection s = L.dcza->select(
            x, t, D,
            [&](int peer) -> std::optional<std::int64_t> {
              check_fault(i, t);
              return learners_[static_cast<std::size_t>(peer)].dcza->peer_count(cube);
            },
            [&](int peer) { learners_[static_cast<std::size_t>(peer)].dcza->create_cube(cube); });
        o.arm = s.arm;
        o.phase = s.phase;
        o.cube = s.cube;
        o.set_empty_pre = s.set_empty_pre;
        o.set_empty_post = s.set_empty_post;
      } else {
        McSelection s = L.mc->select(
            x, t, D,
            [&](int dim, int peer) -> std::int64_t {
              check_fault(i, t);
              const CosState& sub = learners_[static_cast<std::size_t>(peer)].mc->sub(dim);
              return sub.arrival_count(sub.cell_of(McState::coordinate(x, dim)));
            },
            L.policy_rng);
        o.arm = s.arm;
        o.phase = s.phase;
        o.dim = s.dim;
        o.cell = s.cell;
      }
    } catch (const PeerRequestError&) {
      o.phase = Phase::Aborted;
      return o;
    }

    o.cost = L.cost_of(o.arm);
    if (o.arm.is_own()) {
      o.invoked_function = o.arm.index;
      o.prediction = invoke_function(L, o.arm.index, x, true_label, features, t);
    } else if (cfg_.ext.context_only) {
      o.peer = o.arm.index;
      o.prediction = context_only_prediction(learners_[static_cast<std::size_t>(o.peer)], x);
    } else {
      o.peer = o.arm.index;
      auto [pred, slot, pending] = serve_peer_request(o.peer, x, true_label, features, t, D,
                                                      /*caller_keeps_label=*/!L.unsupervised);
      o.prediction = pred;
      o.invoked_function = slot;
      o.peer_pending = pending;
    }
    return o;
  }

  int context_only_prediction(const LearnerRuntime& C, const Context& x) const {
    const CellStats* cs = nullptr;
    if (C.cos) cs = &C.cos->cell(C.cos->cell_of(x));
    else if (C.dcza) cs = &C.dcza->cube_stats(C.dcza->locate(x));
    else cs = &C.mc->sub(0).cell(C.mc->sub(0).cell_of(McState::coordinate(x, 0)));
    return context_only_reply(cs->label_count[0], cs->label_count[1]);
  }

  void accumulate_regret(SlotOutcome& o, std::int64_t t, std::vector<double>& run_exp,
                         std::vector<double>& run_real) {
    if (!oracle_.available() || o.phase == Phase::Aborted) return;
    const double tv = tau(t);
    const OracleChoice best = oracle_.best_arm(o.learner, o.x, tv);
    double invoked_acc;
    if (o.arm.is_own()) {
      invoked_acc = world_.arms[static_cast<std::size_t>(o.learner)]
                        [static_cast<std::size_t>(o.invoked_function)].accuracy(o.x, tv);
    } else if (cfg_.ext.context_only) {
      const double eta1 = world_.eta(o.x);
      invoked_acc = o.prediction == 1 ? eta1 : 1.0 - eta1;
    } else {
      invoked_acc = world_.arms[static_cast<std::size_t>(o.peer)]
                        [static_cast<std::size_t>(o.invoked_function)].accuracy(o.x, tv);
    }
    const bool correct = o.prediction == o.true_label;
    const RegretStep rs = regret_step(best, invoked_acc, o.cost, correct);
    run_exp[static_cast<std::size_t>(o.learner)] += rs.expected;
    run_real[static_cast<std::size_t>(o.learner)] += rs.realized;
    o.exp_regret = rs.expected;
  }

  std::string cell_string(const SlotOutcome& o) const {
    if (learners_[static_cast<std::size_t>(o.learner)].dcza) return o.cube.label();
    if (learners_[static_cast<std::size_t>(o.learner)].mc)
      return "m" + std::to_string(o.dim) + ":" + std::to_string(o.cell);
    return std::to_string(o.cell);
  }

  void writeback_row(RunMetrics& m, const SlotOutcome& o, const std::vector<double>& run_exp) {
    SlotRecord r;
    r.t = o.t;
    r.learner = o.learner;
    r.phase = o.phase;
    r.arm = o.arm;
    r.correct = o.prediction == o.true_label && o.phase != Phase::Aborted;
    r.cost = o.cost;
    r.exp_regret = o.exp_regret;
    r.cum_exp_regret = oracle_.available() ? run_exp[static_cast<std::size_t>(o.learner)]
                                           : std::numeric_limits<double>::quiet_NaN();
    r.cell = cell_string(o);
    r.set_empty_pre = o.set_empty_pre;
    r.set_empty_post = o.set_empty_post;
    m.rows.push_back(std::move(r));
  }

  // Counterfactual per-cell correctness of every own function on dataset
  // streams (current classifier state, no update; the coin gets 0.5 credit).
  void record_counterfactuals(const SlotOutcome& o) {
    if (o.phase == Phase::Aborted) return;
    LearnerRuntime& L = learners_[static_cast<std::size_t>(o.learner)];
    CellCf& cf = cf_correct_[o.learner][cell_string(o)];
    if (cf.correct.empty()) cf.correct.assign(static_cast<std::size_t>(L.own_count), 0.0);
    cf.slots += 1;
    for (int f = 0; f < L.own_count; ++f) {
      const BaseClassifier& c = L.functions[static_cast<std::size_t>(f)].classifier;
      if (std::holds_alternative<RandomCoinClassifier>(c)) {
        cf.correct[static_cast<std::size_t>(f)] += 0.5;
        continue;
      }
      int pred = 1;
      if (const auto* cc = std::get_if<ConstantClassifier>(&c)) pred = cc->label;
      else if (const auto* nb = std::get_if<GaussianNaiveBayes>(&c)) pred = nb->predict(o.features);
      else if (const auto* lr = std::get_if<OnlineLogistic>(&c)) pred = lr->predict(o.features);
      else if (const auto* st = std::get_if<DecisionStump>(&c)) pred = st->predict(o.features);
      if (pred == o.true_label) cf.correct[static_cast<std::size_t>(f)] += 1.0;
    }
  }

  void apply_labeled_outcome(SlotOutcome& rec) {
    LearnerRuntime& L = learners_[static_cast<std::size_t>(rec.learner)];
    const bool correct = rec.prediction == rec.true_label;
    const double reward = hook_(correct ? 1.0 : 0.0, rec.cost);
    if (L.cos) {
      L.cos->record(rec.cell, rec.arm, rec.phase, reward);
      L.cos->labeled_arrival(rec.cell, rec.true_label);
    } else if (L.dcza) {
      L.dcza->record(rec.cube, rec.arm, rec.phase, reward, rec.x);
      L.dcza->labeled_arrival(rec.x, rec.true_label);
    } else {
      L.mc->record_all_dims(rec.arm, rec.x, rec.phase, reward, rec.dim);
      L.mc->labeled_arrival(rec.x, rec.true_label);
    }
    if (rec.arm.is_own()) {
      ArmBackend& b = L.functions[static_cast<std::size_t>(rec.arm.index)];
      if (!b.is_synthetic) classifier_update(b.classifier, rec.features, rec.true_label);
    } else if (rec.peer_pending >= 0) {
      complete_serve(rec.peer, rec.peer_pending, rec.true_label);
    }
  }

  void complete_serve(int callee, std::int64_t pending_id, int true_label) {
    LearnerRuntime& C = learners_[static_cast<std::size_t>(callee)];
    auto it = C.pending.find(pending_id);
    if (it == C.pending.end()) return;
    LearnerRuntime::PendingServe ps = std::move(it->second);
    C.pending.erase(it);
    const bool correct = ps.prediction == true_label;
    const double reward =
        hook_(correct ? 1.0 : 0.0, C.own_costs[static_cast<std::size_t>(ps.function_slot)]);
    const ArmId arm = ArmId::own(ps.function_slot);
    if (C.cos) {
      C.cos->record(ps.cell, arm, ps.own_phase, reward);
      C.cos->labeled_arrival(ps.cell, true_label);
    } else if (C.dcza) {
      C.dcza->record(ps.cube, arm, ps.own_phase, reward, ps.x);
      C.dcza->labeled_arrival(ps.x, true_label);
    } else {
      C.mc->record_all_dims(arm, ps.x, ps.own_phase, reward, 0);
      C.mc->labeled_arrival(ps.x, true_label);
    }
    ArmBackend& b = C.functions[static_cast<std::size_t>(ps.function_slot)];
    if (!b.is_synthetic) classifier_update(b.classifier, ps.features, true_label);
  }

  // Ensemble layer bookkeeping for one batch item. Returns whether every
  // learner exploited.
  bool track_ensemble(const std::vector<SlotOutcome>& staged, int M, std::int64_t& errors) {
    const std::size_t base = staged.size() - static_cast<std::size_t>(M);
    std::vector<int> preds(static_cast<std::size_t>(M), 0);
    std::vector<std::int64_t> cells(static_cast<std::size_t>(M), 0);
    bool all_exploit = true;
    int label = 0;
    for (int i = 0; i < M; ++i) {
      const SlotOutcome& o = staged[base + static_cast<std::size_t>(i)];
      preds[static_cast<std::size_t>(i)] = o.prediction;
      cells[static_cast<std::size_t>(i)] = o.cell;
      all_exploit = all_exploit && o.phase == Phase::Exploitation;
      label = o.true_label;
    }
    const int yhat = ensemble_->predict(preds, cells);
    ens_last_wrong_ = yhat != label;
    if (ens_last_wrong_) ++errors;
    if (ens_reveal_.reveal(ens_reveal_rng_)) ensemble_->update(preds, cells, label);
    return all_exploit;
  }

  // Labeled substitute for the oracle regret on real data: hindsight-best
  // fixed own function per cell, against the realized net reward of the
  // actual choices. This is not the perfect-information regret and is
  // reported under a distinct name.
  void add_pseudo_regret(SimResult& res) {
    const int M = cfg_.learner_count();
    for (int i = 0; i < M; ++i) {
      double chosen_net = 0.0;
      for (const SlotRecord& r : res.metrics.rows) {
        if (r.learner != i || r.phase == Phase::Aborted) continue;
        chosen_net += (r.correct ? 1.0 : 0.0) - r.cost;
      }
      auto it = cf_correct_.find(i);
      if (it == cf_correct_.end()) continue;
      double best_total = 0.0;
      for (const auto& [cell, totals] : it->second) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t f = 0; f < totals.correct.size(); ++f) {
          const double net = totals.correct[f] -
                             learners_[static_cast<std::size_t>(i)].own_costs[f] *
                                 static_cast<double>(totals.slots);
          best = std::max(best, net);
        }
        best_total += best;
      }
      res.extras.emplace_back("pseudo_regret_best_fixed_own_per_cell_L" + std::to_string(i),
                              best_total - chosen_net);
    }
  }

  void check_fault(int learner, std::int64_t t) const {
    if (faults_.count({learner, t}))
      throw PeerRequestError("injected peer-query fault at t=" + std::to_string(t));
  }

 public:
  // Counterfactual accounting for dataset runs (filled during run).
  struct CellCf {
    std::vector<double> correct;  // per own function
    std::int64_t slots = 0;
  };

 private:
  RunConfig cfg_;
  std::int64_t T_ = 0;
  SyntheticWorld world_;
  OracleMap oracle_;
  std::vector<LearnerRuntime> learners_;
  std::vector<DelayBuffer<SlotOutcome>> delay_;
  std::optional<ContextStream> shared_stream_;
  std::vector<ContextStream> learner_streams_;
  std::optional<EnsembleState> ensemble_;
  LabelProcess ens_reveal_;
  Rng ens_reveal_rng_ = Rng(0);
  bool ens_last_wrong_ = false;
  RewardHook hook_ = default_reward_hook();
  std::set<std::pair<int, std::int64_t>> faults_;

  Dataset test_;
  std::int64_t test_rows_ = 0;
  ContextExtractor extractor_;
  std::vector<Context> contexts_;
  std::vector<std::pair<std::vector<double>, int>> pretrain_rows_;
  bool pretrain_pending_ = false;
  std::map<int, std::map<std::string, CellCf>> cf_correct_;
};

}  // namespace ccb
