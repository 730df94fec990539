#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccb/arms.hpp"
#include "ccb/classifiers.hpp"
#include "ccb/common.hpp"
#include "ccb/control.hpp"
#include "ccb/dataset.hpp"
#include "ccb/environment.hpp"
#include "ccb/extensions.hpp"

namespace ccb {

using nlohmann::json;

// An arm backend is either a synthetic accuracy oracle or a trainable
// classifier.
struct FunctionSpec {
  enum class Kind {
    Synthetic,
    ConstantZero,
    ConstantOne,
    RandomCoin,
    GaussianNB,
    OnlineLogistic,
    DecisionStump
  };
  Kind kind = Kind::Synthetic;
  SyntheticArm synthetic;
  double logistic_rate = 0.05;
  int stump_feature = 0;
  double stump_threshold = 0.0;
  int stump_polarity = 1;

  BaseClassifier make_classifier() const {
    switch (kind) {
      case Kind::ConstantZero: return ConstantClassifier{0};
      case Kind::ConstantOne: return ConstantClassifier{1};
      case Kind::RandomCoin: return RandomCoinClassifier{};
      case Kind::GaussianNB: return GaussianNaiveBayes{};
      case Kind::OnlineLogistic: return OnlineLogistic{{}, logistic_rate};
      case Kind::DecisionStump: return DecisionStump{stump_feature, stump_threshold, stump_polarity};
      case Kind::Synthetic: break;
    }
    throw ConfigError("synthetic function has no classifier backend");
  }
};

struct LearnerConfig {
  std::vector<FunctionSpec> functions;
  std::vector<double> own_costs;          // defaults to zeros
  std::map<int, double> peer_costs;       // explicit per-peer entries
  double peer_default_cost = 0.0;
};

struct PolicyConfig {
  enum class Kind { Cos, Dcza, CosMc };
  Kind kind = Kind::Cos;
  double alpha = 1.0;
  std::optional<double> z;
  std::optional<int> m_T;
  double A = 1.0;
  std::optional<double> p;
  bool child_memory = false;
  bool split_strict = false;
  std::optional<int> F_max;
  std::optional<double> d1_exp, d2_exp, d3_exp;  // per-control overrides
};

struct DatasetConfig {
  std::string path;
  DatasetSchema schema;
  ContextMode context;
  std::int64_t train_rows = 5000;
  std::int64_t test_rows = 20000;
  bool pretrain = true;
  bool standardize = true;  // z-score features with train-split moments
};

struct EnvironmentConfig {
  int d = 1;
  ArrivalConfig arrival;
  EtaModel eta;
  bool append_time = false;  // time as an extra context coordinate
  std::optional<DatasetConfig> dataset;
};

struct ExtensionConfig {
  int L_max = 0;
  double p_r = 1.0;
  std::optional<EnsembleConfig> ensemble;
  bool context_only = false;
  int batch = 1;
  std::set<int> unsupervised;
};

struct RunConfig {
  std::int64_t T = 10000;
  std::uint64_t seed = 1;
  std::vector<LearnerConfig> learners;
  std::optional<LearnerTopology> topology;
  PolicyConfig policy;
  EnvironmentConfig env;
  ExtensionConfig ext;
  std::string out_dir = "out";

  int learner_count() const { return static_cast<int>(learners.size()); }
  bool synthetic() const { return !env.dataset.has_value(); }
  int effective_dim() const { return env.d + (env.append_time ? 1 : 0); }

  // Resolved knobs (filled by resolve()).
  int resolved_m_T = 1;
  double resolved_p = 2.0;
  ControlParams controls;
  std::vector<std::vector<double>> resolved_peer_costs;  // [i][j], +inf: not an arm
  std::vector<double> resolved_p_r;

  void resolve();
  json manifest() const;
};

namespace cfgdetail {

inline void expect(bool cond, const std::string& field, const std::string& msg) {
  if (!cond) throw ConfigError("config field '" + field + "': " + msg);
}

inline FunctionSpec parse_function(const json& j, const std::string& where) {
  FunctionSpec fs;
  expect(j.is_object() && j.contains("kind"), where, "function needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "synthetic") {
    fs.kind = FunctionSpec::Kind::Synthetic;
    SyntheticArm& a = fs.synthetic;
    a.amplitude = j.value("a", 0.4);
    expect(a.amplitude > 0.0 && a.amplitude <= 0.45, where + ".a", "must be in (0, 0.45]");
    if (j.contains("w")) {
      if (j.at("w").is_number()) a.frequency = {j.at("w").get<double>()};
      else a.frequency = j.at("w").get<std::vector<double>>();
    }
    a.phase = j.value("phase", 0.0);
    if (j.contains("clip")) {
      const auto clip = j.at("clip").get<std::vector<double>>();
      expect(clip.size() == 2, where + ".clip", "expects [lo, hi]");
      a.clip_lo = clip[0];
      a.clip_hi = clip[1];
    }
    a.drift_rate = j.value("drift_rate", 0.0);
  } else if (kind == "constant_zero") {
    fs.kind = FunctionSpec::Kind::ConstantZero;
  } else if (kind == "constant_one") {
    fs.kind = FunctionSpec::Kind::ConstantOne;
  } else if (kind == "random") {
    fs.kind = FunctionSpec::Kind::RandomCoin;
  } else if (kind == "gaussian_nb") {
    fs.kind = FunctionSpec::Kind::GaussianNB;
  } else if (kind == "online_logistic") {
    fs.kind = FunctionSpec::Kind::OnlineLogistic;
    fs.logistic_rate = j.value("rate", 0.05);
  } else if (kind == "stump") {
    fs.kind = FunctionSpec::Kind::DecisionStump;
    fs.stump_feature = j.value("feature", 0);
    fs.stump_threshold = j.value("threshold", 0.0);
    fs.stump_polarity = j.value("polarity", 1);
  } else {
    throw ConfigError("config field '" + where + "': unknown function kind '" + kind + "'");
  }
  return fs;
}

inline ArrivalConfig parse_arrival(const json& env, int d) {
  ArrivalConfig ac;
  if (env.contains("arrival")) {
    const json& a = env.at("arrival");
    const std::string kind = a.value("kind", "iid_uniform");
    if (kind == "iid_uniform") ac.kind = ArrivalConfig::Kind::IidUniform;
    else if (kind == "uniform_range") {
      ac.kind = ArrivalConfig::Kind::UniformRange;
      ac.lo = a.at("lo").get<std::vector<double>>();
      ac.hi = a.at("hi").get<std::vector<double>>();
      expect(static_cast<int>(ac.lo.size()) == d && static_cast<int>(ac.hi.size()) == d,
             "environment.arrival", "lo/hi must have d entries");
    } else if (kind == "worst") ac.kind = ArrivalConfig::Kind::Worst;
    else if (kind == "best") {
      ac.kind = ArrivalConfig::Kind::Best;
      ac.best_p = a.value("p", 2.0);
    } else if (kind == "trace") {
      ac.kind = ArrivalConfig::Kind::Trace;
      for (const auto& pt : a.at("points")) {
        if (pt.is_number()) ac.trace.emplace_back(std::vector<double>{pt.get<double>()});
        else ac.trace.emplace_back(pt.get<std::vector<double>>());
      }
    } else {
      throw ConfigError("config field 'environment.arrival.kind': unknown kind '" + kind + "'");
    }
  }
  const std::string corr = env.value("correlation", "best");
  if (corr == "independent") ac.correlation = ArrivalConfig::Correlation::Independent;
  else if (corr == "best") ac.correlation = ArrivalConfig::Correlation::Best;
  else if (corr == "worst") ac.correlation = ArrivalConfig::Correlation::Worst;
  else throw ConfigError("config field 'environment.correlation': unknown value '" + corr + "'");
  ac.designated = env.value("designated", 0);
  return ac;
}

inline EtaModel parse_eta(const json& env) {
  EtaModel eta;
  if (!env.contains("eta")) return eta;
  const json& e = env.at("eta");
  const std::string kind = e.value("kind", "const");
  if (kind == "const") {
    eta.kind = EtaModel::Kind::Constant;
    eta.value = e.value("value", 0.5);
  } else if (kind == "linear") {
    eta.kind = EtaModel::Kind::Linear;
  } else if (kind == "step") {
    eta.kind = EtaModel::Kind::Step;
    eta.threshold = e.value("threshold", 0.5);
    eta.low = e.value("low", 0.0);
    eta.high = e.value("high", 1.0);
  } else {
    throw ConfigError("config field 'environment.eta.kind': unknown value '" + kind + "'");
  }
  return eta;
}

inline ContextMode parse_context_mode(const json& j) {
  ContextMode cm;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "prev_label") cm.kind = ContextMode::Kind::PrevLabel;
    else if (s == "time") cm.kind = ContextMode::Kind::Time;
    else throw ConfigError("config field 'dataset.context': unknown mode '" + s + "'");
  } else if (j.is_object() && j.contains("feature")) {
    cm.kind = ContextMode::Kind::Feature;
    cm.feature_name = j.at("feature").get<std::string>();
    cm.log_scale = j.value("log_scale", true);
  } else {
    throw ConfigError("config field 'dataset.context': expected mode string or {feature:...}");
  }
  return cm;
}

inline DatasetSchema parse_schema(const json& j) {
  DatasetSchema s;
  if (j.contains("label_column")) s.label_column = j.at("label_column").get<int>();
  if (j.contains("has_header")) s.has_header = j.at("has_header").get<bool>();
  if (j.contains("label_map")) {
    s.label_map.clear();
    for (const auto& [k, v] : j.at("label_map").items()) s.label_map[k] = v.get<int>();
  }
  if (j.contains("default_label")) {
    if (j.at("default_label").is_null()) s.default_label.reset();
    else s.default_label = j.at("default_label").get<int>();
  }
  if (j.contains("categorical")) {
    for (const auto& [col, spec] : j.at("categorical").items()) {
      DatasetSchema::CategoricalColumn cc;
      if (spec.is_string()) {
        cc.encoding = spec.get<std::string>() == "onehot" ? DatasetSchema::Encoding::OneHot
                                                          : DatasetSchema::Encoding::Ordinal;
      } else if (spec.is_object()) {
        cc.encoding = spec.value("encoding", "ordinal") == std::string("onehot")
                          ? DatasetSchema::Encoding::OneHot
                          : DatasetSchema::Encoding::Ordinal;
        if (spec.contains("dictionary"))
          cc.dictionary = spec.at("dictionary").get<std::vector<std::string>>();
        cc.unknown = spec.value("unknown", "other") == std::string("error")
                         ? DatasetSchema::UnknownPolicy::Error
                         : DatasetSchema::UnknownPolicy::OtherBucket;
      }
      s.categorical[std::stoi(col)] = cc;
    }
  }
  return s;
}

}  // namespace cfgdetail

inline RunConfig parse_config(const json& j) {
  using cfgdetail::expect;
  RunConfig rc;
  rc.T = j.value("T", std::int64_t{10000});
  expect(rc.T >= 0, "T", "must be >= 0");
  rc.seed = j.value("seed", std::uint64_t{1});
  rc.out_dir = j.value("out", "out");

  expect(j.contains("learners") && j.at("learners").is_array() && !j.at("learners").empty(),
         "learners", "must be a non-empty array");
  int li = 0;
  for (const json& lj : j.at("learners")) {
    LearnerConfig lc;
    const std::string where = "learners[" + std::to_string(li) + "]";
    expect(lj.contains("functions") && lj.at("functions").is_array() && !lj.at("functions").empty(),
           where, "needs a non-empty 'functions' array");
    int fi = 0;
    for (const json& fj : lj.at("functions"))
      lc.functions.push_back(cfgdetail::parse_function(fj, where + ".functions[" + std::to_string(fi++) + "]"));
    if (lj.contains("costs")) {
      const json& cj = lj.at("costs");
      if (cj.contains("own")) {
        lc.own_costs = cj.at("own").get<std::vector<double>>();
        expect(lc.own_costs.size() == lc.functions.size(), where + ".costs.own",
               "must have one entry per function");
      }
      if (cj.contains("peer_default")) lc.peer_default_cost = cj.at("peer_default").get<double>();
      if (cj.contains("peer")) {
        for (const auto& [k, v] : cj.at("peer").items())
          lc.peer_costs[std::stoi(k)] = v.get<double>();
      }
    }
    lc.own_costs.resize(lc.functions.size(), 0.0);
    for (double c : lc.own_costs)
      expect(c >= 0.0 && c <= 1.0, where + ".costs.own", "costs must lie in [0,1]");
    for (const auto& [p, c] : lc.peer_costs)
      expect(c >= 0.0 && c <= 1.0, where + ".costs.peer", "costs must lie in [0,1]");
    expect(lc.peer_default_cost >= 0.0 && lc.peer_default_cost <= 1.0, where + ".costs.peer_default",
           "must lie in [0,1]");
    rc.learners.push_back(std::move(lc));
    ++li;
  }

  if (j.contains("topology")) {
    LearnerTopology topo;
    topo.learners = rc.learner_count();
    for (const auto& ej : j.at("topology").at("edges")) {
      expect(ej.is_array() && ej.size() == 3, "topology.edges", "each edge is [i, j, w]");
      topo.edges.push_back({ej[0].get<int>(), ej[1].get<int>(), ej[2].get<double>()});
    }
    rc.topology = std::move(topo);
  }

  if (j.contains("policy")) {
    const json& pj = j.at("policy");
    PolicyConfig& pc = rc.policy;
    const std::string kind = pj.value("policy", "cos");
    if (kind == "cos") pc.kind = PolicyConfig::Kind::Cos;
    else if (kind == "dcza") pc.kind = PolicyConfig::Kind::Dcza;
    else if (kind == "cos_mc") pc.kind = PolicyConfig::Kind::CosMc;
    else throw ConfigError("config field 'policy.policy': unknown policy '" + kind + "'");
    pc.alpha = pj.value("alpha", 1.0);
    expect(pc.alpha > 0.0, "policy.alpha", "must be > 0");
    if (pj.contains("z")) {
      pc.z = pj.at("z").get<double>();
      expect(*pc.z > 0.0 && *pc.z < 1.0, "policy.z", "must lie in (0,1)");
    }
    if (pj.contains("m_T")) {
      pc.m_T = pj.at("m_T").get<int>();
      expect(*pc.m_T >= 1, "policy.m_T", "must be >= 1");
    }
    pc.A = pj.value("A", 1.0);
    expect(pc.A > 0.0, "policy.A", "must be > 0");
    if (pj.contains("p")) {
      pc.p = pj.at("p").get<double>();
      expect(*pc.p > 0.0, "policy.p", "must be > 0");
    }
    pc.child_memory = pj.value("child_memory", false);
    pc.split_strict = pj.value("split_strict", false);
    if (pj.contains("F_max")) pc.F_max = pj.at("F_max").get<int>();
    if (pj.contains("overrides")) {
      const json& ov = pj.at("overrides");
      if (ov.contains("D1_exp")) pc.d1_exp = ov.at("D1_exp").get<double>();
      if (ov.contains("D2_exp")) pc.d2_exp = ov.at("D2_exp").get<double>();
      if (ov.contains("D3_exp")) pc.d3_exp = ov.at("D3_exp").get<double>();
    }
  }

  if (j.contains("environment")) {
    const json& ej = j.at("environment");
    rc.env.d = ej.value("d", 1);
    expect(rc.env.d >= 1, "environment.d", "must be >= 1");
    rc.env.arrival = cfgdetail::parse_arrival(ej, rc.env.d);
    rc.env.eta = cfgdetail::parse_eta(ej);
    rc.env.append_time = ej.value("append_time", false);
    if (ej.contains("dataset")) {
      const json& dj = ej.at("dataset");
      DatasetConfig dc;
      dc.path = dj.at("path").get<std::string>();
      if (dj.contains("schema")) {
        if (dj.at("schema").is_string()) {
          std::ifstream sf(dj.at("schema").get<std::string>());
          expect(static_cast<bool>(sf), "environment.dataset.schema", "cannot open schema file");
          json sj;
          sf >> sj;
          dc.schema = cfgdetail::parse_schema(sj);
        } else {
          dc.schema = cfgdetail::parse_schema(dj.at("schema"));
        }
      }
      if (dj.contains("context")) dc.context = cfgdetail::parse_context_mode(dj.at("context"));
      dc.train_rows = dj.value("train_rows", std::int64_t{5000});
      dc.test_rows = dj.value("test_rows", std::int64_t{20000});
      dc.pretrain = dj.value("pretrain", true);
      dc.standardize = dj.value("standardize", true);
      rc.env.dataset = std::move(dc);
    }
  }

  // extension keys accepted at the top level
  if (j.contains("delay")) rc.ext.L_max = j.at("delay").value("L_max", 0);
  expect(rc.ext.L_max >= 0, "delay.L_max", "must be >= 0");
  rc.ext.p_r = j.value("p_r", 1.0);
  expect(rc.ext.p_r >= 0.0 && rc.ext.p_r <= 1.0, "p_r", "must lie in [0,1]");
  if (j.contains("ensemble")) {
    const json& ej = j.at("ensemble");
    EnsembleConfig ec;
    const std::string mode = ej.value("mode", "sgd");
    if (mode == "sgd") ec.rule = EnsembleConfig::Rule::Sgd;
    else if (mode == "mult") ec.rule = EnsembleConfig::Rule::Multiplicative;
    else throw ConfigError("config field 'ensemble.mode': unknown value '" + mode + "'");
    ec.per_cell = ej.value("per_cell", false);
    ec.alpha_w = ej.value("alpha_w", 100.0);
    ec.beta = ej.value("beta", 0.5);
    rc.ext.ensemble = ec;
  }
  rc.ext.context_only = j.value("context_only", false);
  rc.ext.batch = j.value("batch", 1);
  expect(rc.ext.batch >= 1, "batch", "must be >= 1");
  if (j.contains("unsupervised"))
    for (const auto& u : j.at("unsupervised")) rc.ext.unsupervised.insert(u.get<int>());

  rc.resolve();
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

inline void RunConfig::resolve() {
  const int M = learner_count();
  const int d_eff = env.dataset ? 1 : effective_dim();

  int f_max = 1;
  for (const LearnerConfig& lc : learners)
    f_max = std::max(f_max, static_cast<int>(lc.functions.size()));
  const int F_max = policy.F_max.value_or(f_max);

  // DCZA zooming parameters and the shared exploration exponent
  double z;
  if (policy.kind == PolicyConfig::Kind::Dcza) {
    const auto [p_def, z_def] = dcza_parameters(policy.alpha, d_eff);
    resolved_p = policy.p.value_or(p_def);
    z = policy.z.value_or(2.0 * policy.alpha / resolved_p);
  } else if (policy.kind == PolicyConfig::Kind::CosMc) {
    z = policy.z.value_or(ControlParams::default_exponent(policy.alpha, 2));
  } else {
    z = policy.z.value_or(ControlParams::default_exponent(policy.alpha, d_eff));
  }
  controls.z1 = policy.d1_exp.value_or(z);
  controls.z2 = policy.d2_exp.value_or(z);
  controls.z3 = policy.d3_exp.value_or(z);
  controls.F_max = F_max;

  if (policy.kind == PolicyConfig::Kind::CosMc) {
    resolved_m_T = policy.m_T.value_or(slicing_parameter(T, policy.alpha, 2));
  } else {
    resolved_m_T = policy.m_T.value_or(slicing_parameter(T, policy.alpha, d_eff));
  }

  // Peer costs: lowest-cost path sums when a topology is given, explicit
  // entries override, default otherwise. +inf marks a non-arm.
  const double inf = std::numeric_limits<double>::infinity();
  resolved_peer_costs.assign(static_cast<std::size_t>(M),
                             std::vector<double>(static_cast<std::size_t>(M), inf));
  std::vector<std::vector<double>> paths;
  if (topology) paths = path_costs(*topology);
  for (int i = 0; i < M; ++i) {
    for (int jj = 0; jj < M; ++jj) {
      if (i == jj) continue;
      double c = topology ? paths[static_cast<std::size_t>(i)][static_cast<std::size_t>(jj)]
                          : learners[static_cast<std::size_t>(i)].peer_default_cost;
      auto it = learners[static_cast<std::size_t>(i)].peer_costs.find(jj);
      if (it != learners[static_cast<std::size_t>(i)].peer_costs.end()) c = it->second;
      resolved_peer_costs[static_cast<std::size_t>(i)][static_cast<std::size_t>(jj)] = c;
    }
  }

  resolved_p_r.assign(static_cast<std::size_t>(M), ext.p_r);
  for (int u : ext.unsupervised) {
    if (u < 0 || u >= M) throw ConfigError("config field 'unsupervised': learner index out of range");
    resolved_p_r[static_cast<std::size_t>(u)] = 0.0;
  }

  if (ext.ensemble && policy.kind != PolicyConfig::Kind::Cos)
    throw ConfigError("config field 'ensemble': ensemble mode requires the cos policy");
  if (env.dataset && ext.batch != 1)
    throw ConfigError("config field 'batch': batch mode is synthetic-only");
}

inline json RunConfig::manifest() const {
  json m;
  m["T"] = T;
  m["seed"] = seed;
  m["learner_count"] = learner_count();
  json pol;
  pol["policy"] = policy.kind == PolicyConfig::Kind::Cos
                      ? "cos"
                      : (policy.kind == PolicyConfig::Kind::Dcza ? "dcza" : "cos_mc");
  pol["alpha"] = policy.alpha;
  pol["z"] = json::array({controls.z1, controls.z2, controls.z3});
  pol["F_max"] = controls.F_max;
  if (policy.kind == PolicyConfig::Kind::Dcza) {
    pol["A"] = policy.A;
    pol["p"] = resolved_p;
    pol["child_memory"] = policy.child_memory;
    m["partition"] = {{"kind", "adaptive"}, {"A", policy.A}, {"p", resolved_p}};
  } else {
    pol["m_T"] = resolved_m_T;
    m["partition"] = {{"kind", "uniform"}, {"m_T", resolved_m_T}};
  }
  m["policy"] = pol;
  json ext_j;
  ext_j["delay"] = {{"L_max", ext.L_max}};
  ext_j["p_r"] = ext.p_r;
  ext_j["context_only"] = ext.context_only;
  ext_j["batch"] = ext.batch;
  ext_j["unsupervised"] = json::array();
  for (int u : ext.unsupervised) ext_j["unsupervised"].push_back(u);
  if (ext.ensemble) {
    ext_j["ensemble"] = {
        {"mode", ext.ensemble->rule == EnsembleConfig::Rule::Sgd ? "sgd" : "mult"},
        {"per_cell", ext.ensemble->per_cell}};
  }
  m["extensions"] = ext_j;
  json env_j;
  env_j["d"] = env.d;
  env_j["append_time"] = env.append_time;
  env_j["mode"] = env.dataset ? "dataset" : "synthetic";
  if (env.dataset) env_j["dataset_path"] = env.dataset->path;
  m["environment"] = env_j;
  json costs = json::array();
  for (const auto& row : resolved_peer_costs) {
    json r = json::array();
    for (double c : row) r.push_back(std::isfinite(c) ? json(c) : json("inf"));
    costs.push_back(r);
  }
  m["peer_costs"] = costs;
  return m;
}

}  // namespace ccb
