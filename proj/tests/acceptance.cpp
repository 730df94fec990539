// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 11 needs a user-supplied KDD Cup 1999 CSV (CCB_KDD_CSV
// or ./data/kddcup.csv); without one it reports SKIP and runs the same check
// on a bundled synthetic stand-in stream for information.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ccb/ccb.hpp"

using namespace ccb;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::cout << "criterion " << criterion << ": " << (pass ? "PASS" : "FAIL") << " -- " << detail
            << std::endl;
  if (!pass) ++g_failures;
}

void report_skip(int criterion, const std::string& detail) {
  std::cout << "criterion " << criterion << ": SKIP -- " << detail << std::endl;
}

SimResult run_sim(json j, std::uint64_t seed) {
  j["seed"] = seed;
  Simulation sim(parse_config(j));
  return sim.run();
}

// Shared synthetic world for the regret criteria: two learners, two
// certified-Lipschitz sinusoid functions each, arrivals concentrated on
// [0.04, 0.17] so the theorem-scale control functions saturate within the
// horizon.
json regret_world() {
  return json::parse(R"({
    "T": 50000,
    "learners": [
      {"functions": [{"kind":"synthetic","a":0.4,"w":1.0,"phase":0.0},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.25}],
       "costs": {"peer": {"1": 0.1}}},
      {"functions": [{"kind":"synthetic","a":0.4,"w":1.0,"phase":0.125},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.625}],
       "costs": {"peer": {"0": 0.1}}}
    ],
    "policy": {"policy":"cos","alpha":1.0},
    "environment": {"d":1,
      "arrival":{"kind":"uniform_range","lo":[0.04],"hi":[0.17]},
      "correlation":"best","eta":{"kind":"const","value":0.5}}
  })");
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stdev_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
}

// --- criterion 1 & 2: sublinear regret, CoS theorem parameters and DCZA Z2

double criterion_1(std::vector<SimResult>& cos_keep) {
  const auto start = std::chrono::steady_clock::now();
  int pass_seeds = 0;
  std::vector<double> finals;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimResult res = run_sim(regret_world(), seed);
    const auto slope = res.summaries[0].regret_slope;
    if (slope && *slope <= 0.85) ++pass_seeds;
    finals.push_back(res.summaries[0].final_cum_expected);
    cos_keep.push_back(std::move(res));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream d;
  d << "slope <= 0.85 on " << pass_seeds << "/10 seeds, runtime " << secs << "s";
  report(1, pass_seeds >= 9 && secs < 60.0, d.str());
  return mean_of(finals);
}

double criterion_2(double cos_mean_final, std::vector<SimResult>& dcza_keep) {
  json j = regret_world();
  j["policy"] = {{"policy", "dcza"}, {"alpha", 1.0}, {"A", 1.0}};  // p, z from Table-II form
  int pass_seeds = 0;
  std::vector<double> finals;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimResult res = run_sim(j, seed);
    const auto slope = res.summaries[0].regret_slope;
    if (slope && *slope <= 0.90) ++pass_seeds;
    finals.push_back(res.summaries[0].final_cum_expected);
    dcza_keep.push_back(std::move(res));
  }
  const double ratio = mean_of(finals) / cos_mean_final;
  std::ostringstream d;
  d << "slope <= 0.90 on " << pass_seeds << "/10 seeds, mean final regret " << mean_of(finals)
    << " = " << ratio << "x CoS";
  report(2, pass_seeds >= 9 && ratio <= 2.0, d.str());
  return mean_of(finals);
}

// --- criterion 3: DCZA level bound at A=1, p=4 over 10^5 slots

void criterion_3() {
  json j = regret_world();
  j["T"] = 100000;
  j["policy"] = {{"policy", "dcza"}, {"alpha", 1.0}, {"A", 1.0}, {"p", 4.0}, {"z", 0.125}};
  j["environment"]["arrival"] = {{"kind", "iid_uniform"}};
  bool ok = true;
  int max_level = -1, bound = -1;
  try {
    // the tree aborts the run on any split beyond the bound
    Simulation sim(parse_config(j));
    sim.run();
    const auto& tree = sim.learner(0).dcza->tree();
    max_level = tree.max_active_level();
    bound = static_cast<int>(std::floor(std::log2(static_cast<double>(tree.total_arrivals())) / 4.0)) + 1;
    ok = max_level <= bound;
  } catch (const std::logic_error& e) {
    ok = false;
  }
  std::ostringstream d;
  d << "max active level " << max_level << " <= floor(log2(t)/4)+1 = " << bound
    << ", checked on every split";
  report(3, ok, d.str());
}

// --- criterion 4: exploration/training accounting from the event logs

void criterion_4(const std::vector<SimResult>& cos_runs, const std::vector<SimResult>& dcza_runs) {
  json j = regret_world();
  const RunConfig cos_cfg = parse_config(j);
  j["policy"] = {{"policy", "dcza"}, {"alpha", 1.0}, {"A", 1.0}};
  const RunConfig dcza_cfg = parse_config(j);

  std::int64_t violations = 0, audited = 0;
  auto audit = [&](const SimResult& res, const RunConfig& cfg) {
    const ControlValues D = control_values(cfg.T, cfg.controls);
    std::map<std::tuple<int, std::string, std::string>, std::int64_t> explo, train;
    for (const auto& r : res.metrics.rows) {
      if (r.phase == Phase::Exploration) explo[{r.learner, r.cell, r.arm.label()}] += 1;
      if (r.phase == Phase::Training) train[{r.learner, r.cell, r.arm.label()}] += 1;
    }
    for (const auto& [key, n] : explo) {
      const double bound = std::get<2>(key)[0] == 'f' ? D.D1 : D.D3;
      ++audited;
      if (n > static_cast<std::int64_t>(std::ceil(bound)) + 1) ++violations;
    }
    for (const auto& [key, n] : train) {
      ++audited;
      if (n > static_cast<std::int64_t>(std::ceil(D.D2)) + 1) ++violations;
    }
  };
  for (const auto& r : cos_runs) audit(r, cos_cfg);
  for (const auto& r : dcza_runs) audit(r, dcza_cfg);
  std::ostringstream d;
  d << audited << " (learner, cell/cube, arm) budgets audited across 20 runs, " << violations
    << " violations";
  report(4, violations == 0, d.str());
}

// --- criterion 5: oracle equals exhaustive enumeration

void criterion_5() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::int64_t mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int M = 2 + static_cast<int>(rng() % 3);
    SyntheticWorld w;
    std::vector<std::vector<double>> own_costs, peer_costs;
    for (int i = 0; i < M; ++i) {
      const int F = 1 + static_cast<int>(rng() % 3);
      std::vector<SyntheticArm> arms;
      std::vector<double> costs;
      for (int f = 0; f < F; ++f) {
        arms.push_back(SyntheticArm{0.05 + 0.4 * u(rng), {0.5 + 2.0 * u(rng)}, u(rng)});
        costs.push_back(0.5 * u(rng));
      }
      w.arms.push_back(arms);
      own_costs.push_back(costs);
      std::vector<double> pc(static_cast<std::size_t>(M));
      for (int jj = 0; jj < M; ++jj)
        pc[static_cast<std::size_t>(jj)] =
            jj == i ? std::numeric_limits<double>::infinity() : 0.5 * u(rng);
      peer_costs.push_back(pc);
    }
    OracleMap oracle(&w, own_costs, peer_costs);
    for (int g = 0; g < 1000; ++g) {
      const Context x({g / 999.0});
      for (int i = 0; i < M; ++i) {
        ArmId best_arm = ArmId::own(0);
        double best = -1e300;
        for (std::size_t f = 0; f < w.arms[static_cast<std::size_t>(i)].size(); ++f) {
          const double net =
              w.arms[static_cast<std::size_t>(i)][f].accuracy(x) - own_costs[static_cast<std::size_t>(i)][f];
          if (net > best) {
            best = net;
            best_arm = ArmId::own(static_cast<int>(f));
          }
        }
        for (int jj = 0; jj < M; ++jj) {
          if (jj == i) continue;
          double acc = -1e300;
          for (const auto& arm : w.arms[static_cast<std::size_t>(jj)]) acc = std::max(acc, arm.accuracy(x));
          const double net = acc - peer_costs[static_cast<std::size_t>(i)][static_cast<std::size_t>(jj)];
          if (net > best) {
            best = net;
            best_arm = ArmId::peer(jj);
          }
        }
        const OracleChoice c = oracle.best_arm(i, x);
        if (!(c.arm == best_arm) || c.net != best) ++mismatches;
      }
    }
  }
  report(5, mismatches == 0,
         "20 random configurations x 1000 grid points, " + std::to_string(mismatches) +
             " mismatches (exact)");
}

// --- criterion 6: empirical Corollary-1 delay bound

void criterion_6() {
  json j = json::parse(R"({
    "T": 20000,
    "learners": [
      {"functions": [{"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.9,0.9]},
                     {"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.6,0.6]},
                     {"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.4,0.4]},
                     {"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.1,0.1]}],
       "costs": {"peer": {"1": 0.1}}},
      {"functions": [{"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.5,0.5]},
                     {"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.5,0.5]},
                     {"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.5,0.5]},
                     {"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.5,0.5]}],
       "costs": {"peer": {"0": 0.1}}}
    ],
    "policy": {"policy":"cos","alpha":1.0,"z":0.125},
    "environment": {"d":1,"arrival":{"kind":"iid_uniform"},"correlation":"best",
                    "eta":{"kind":"const","value":0.5}}
  })");
  std::vector<double> diffs;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double nd = run_sim(j, seed).summaries[0].final_cum_expected;
    json jd = j;
    jd["delay"] = {{"L_max", 5}};
    const double dd = run_sim(jd, seed).summaries[0].final_cum_expected;
    diffs.push_back(dd - nd);
  }
  const double m = mean_of(diffs), sd = stdev_of(diffs);
  std::ostringstream d;
  d << "mean(regret_delay - regret_nodelay) = " << m << " <= 5 + 3*" << sd << " = " << 5 + 3 * sd;
  report(6, m <= 5.0 + 3.0 * sd, d.str());
}

// --- criterion 7: Theorem-3 exploration scaling in 1/p_r

void criterion_7() {
  json j = json::parse(R"({
    "T": 50000,
    "learners": [
      {"functions": [{"kind":"synthetic","a":0.4,"w":1.0,"phase":0.0},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.25},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.5},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.75}],
       "costs": {"peer": {"1": 0.1}}},
      {"functions": [{"kind":"synthetic","a":0.4,"w":1.0,"phase":0.0},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.25},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.5},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.75}],
       "costs": {"peer": {"0": 0.1}}}
    ],
    "policy": {"policy":"cos","alpha":1.0,"z":0.125},
    "environment": {"d":1,"arrival":{"kind":"uniform_range","lo":[0.07],"hi":[0.12]},
                    "correlation":"best","eta":{"kind":"const","value":0.5}}
  })");
  std::int64_t forced_full = 0, forced_half = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const auto& r : run_sim(j, seed).metrics.rows)
      if (r.learner == 0 && r.phase != Phase::Exploitation) ++forced_full;
    json jh = j;
    jh["p_r"] = 0.5;
    for (const auto& r : run_sim(jh, seed).metrics.rows)
      if (r.learner == 0 && r.phase != Phase::Exploitation) ++forced_half;
  }
  const double ratio = static_cast<double>(forced_half) / static_cast<double>(forced_full);
  std::ostringstream d;
  d << "non-exploitation slots: " << forced_full << " at p_r=1 vs " << forced_half
    << " at p_r=0.5, ratio " << ratio << " in [1.7, 2.3]";
  report(7, ratio >= 1.7 && ratio <= 2.3, d.str());
}

// --- criterion 8: context value against the no-context baseline

void criterion_8() {
  json j = json::parse(R"({
    "T": 20000,
    "learners": [
      {"functions": [{"kind":"synthetic","a":0.45,"w":1.0,"phase":0.25},
                     {"kind":"synthetic","a":0.45,"w":1.0,"phase":0.75}],
       "costs": {"peer": {"1": 0.3}}},
      {"functions": [{"kind":"synthetic","a":0.45,"w":1.0,"phase":0.25},
                     {"kind":"synthetic","a":0.45,"w":1.0,"phase":0.75}],
       "costs": {"peer": {"0": 0.3}}}
    ],
    "policy": {"policy":"cos","alpha":1.0,"z":0.125},
    "environment": {"d":1,"arrival":{"kind":"iid_uniform"},"correlation":"best",
                    "eta":{"kind":"const","value":0.5}}
  })");
  int wins = 0;
  double last_gap = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double with_ctx = run_sim(j, seed).summaries[0].error_pct;
    json jb = j;
    jb["policy"]["m_T"] = 1;  // no-context bandit baseline
    const double baseline = run_sim(jb, seed).summaries[0].error_pct;
    last_gap = baseline - with_ctx;
    if (last_gap >= 5.0) ++wins;
  }
  std::ostringstream d;
  d << wins << "/10 seeds with error gap >= 5pp (last gap " << last_gap << "pp)";
  report(8, wins >= 9, d.str());
}

// --- criterion 9: CoS-MC picks the informative dimension

void criterion_9() {
  json j = json::parse(R"({
    "T": 50000,
    "learners": [
      {"functions": [{"kind":"synthetic","a":0.45,"w":[0.5,0.0],"phase":-0.25},
                     {"kind":"synthetic","a":0.45,"w":[0.5,0.0],"phase":0.25}]}
    ],
    "policy": {"policy":"cos_mc","alpha":1.0,"m_T":25},
    "environment": {"d":2,"arrival":{"kind":"iid_uniform"},"correlation":"best",
                    "eta":{"kind":"const","value":0.5}}
  })");
  int pass_seeds = 0;
  double last_share = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SimResult res = run_sim(j, seed);
    std::int64_t dim0 = 0, total = 0;
    for (const auto& r : res.metrics.rows) {
      if (r.phase != Phase::Exploitation) continue;
      ++total;
      if (r.cell.rfind("m0:", 0) == 0) ++dim0;
    }
    last_share = total > 0 ? 100.0 * static_cast<double>(dim0) / static_cast<double>(total) : 0.0;
    if (last_share > 90.0) ++pass_seeds;
  }
  std::ostringstream d;
  d << pass_seeds << "/10 seeds with informative-dimension share > 90% (last " << last_share
    << "%)";
  report(9, pass_seeds >= 8, d.str());
}

// --- criterion 10: ensemble layer unit examples, exact

void criterion_10() {
  bool ok = true;
  const std::vector<std::int64_t> cells(4, 0);
  {
    EnsembleState ens(EnsembleConfig{}, 4, 1);
    ok = ok && ens.predict({1, 1, 0, 0}, cells) == 1;  // boundary sum 0.5
    ok = ok && ens.predict({0, 0, 0, 0}, cells) == 0;
    ok = ok && ens.predict({1, 1, 1, 1}, cells) == 1;
  }
  {
    EnsembleConfig cfg;
    cfg.rule = EnsembleConfig::Rule::Multiplicative;
    cfg.beta = 0.5;
    EnsembleState ens(cfg, 4, 1);
    ens.update({1, 1, 0, 0}, cells, 1);
    const auto& w = ens.weights();
    ok = ok && std::abs(w[0] - 1.0 / 3) < 1e-12 && std::abs(w[1] - 1.0 / 3) < 1e-12 &&
         std::abs(w[2] - 1.0 / 6) < 1e-12 && std::abs(w[3] - 1.0 / 6) < 1e-12;
  }
  {
    EnsembleConfig cfg;
    cfg.alpha_w = 100.0;
    EnsembleState ens(cfg, 4, 1);
    ens.update({1, 1, 0, 0}, cells, 1);  // residual 0.5, step 0.005 on voters
    const auto& w = ens.weights();
    ok = ok && std::abs(w[0] - 0.255) < 1e-12 && std::abs(w[1] - 0.255) < 1e-12 &&
         std::abs(w[2] - 0.25) < 1e-12 && std::abs(w[3] - 0.25) < 1e-12;
  }
  {
    EnsembleConfig cfg;
    cfg.alpha_w = 100.0;
    EnsembleState ens(cfg, 2, 1);
    const std::vector<std::int64_t> two(2, 0);
    ens.update({1, 1}, two, 1);  // s = 1 = y: zero residual
    ok = ok && ens.weights()[0] == 0.5 && ens.weights()[1] == 0.5;
  }
  report(10, ok, "weighted-majority boundary cases and both update rules match hand values");
}

// --- criterion 11: KDD desk-scale ordering

json kdd_config(const std::string& path, bool with_context) {
  json j;
  j["T"] = 5000;
  j["learners"] = json::parse(R"([
    {"functions": [{"kind":"gaussian_nb"}, {"kind":"online_logistic","rate":0.05}]},
    {"functions": [{"kind":"constant_one"}, {"kind":"online_logistic","rate":0.01}]},
    {"functions": [{"kind":"gaussian_nb"}, {"kind":"stump","feature":0,"threshold":0.0}]},
    {"functions": [{"kind":"random"}, {"kind":"constant_zero"}]}
  ])");
  j["policy"] = {{"policy", "cos"}, {"alpha", 1.0}, {"z", 0.125}};
  if (!with_context) j["policy"]["m_T"] = 1;
  json schema;
  schema["categorical"] = {{"1", "ordinal"}, {"2", "ordinal"}, {"3", "ordinal"}};
  j["environment"] = {{"d", 1},
                      {"dataset",
                       {{"path", path},
                        {"schema", schema},
                        {"context", "prev_label"},
                        {"train_rows", 5000},
                        {"test_rows", 5000}}}};
  return j;
}

std::string make_standin_csv() {
  const std::string path = "/tmp/ccb_standin_kdd.csv";
  std::ofstream out(path);
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  int y = 0;
  const char* protos[3] = {"tcp", "udp", "icmp"};
  for (int t = 0; t < 10000; ++t) {
    if (u(rng) < 0.05) y = 1 - y;  // bursty attacks
    const double f0 = (y ? 2.0 : 0.0) + noise(rng);
    const double f1 = (y ? -1.0 : 1.0) + 2.0 * noise(rng);
    const double f2 = noise(rng);
    out << f0 << ',' << protos[rng() % 3] << ',' << "svc" << rng() % 4 << ',' << "SF" << ','
        << f1 << ',' << f2 << ',' << (y ? "neptune." : "normal.") << '\n';
  }
  return path;
}

void criterion_11() {
  std::string path;
  if (const char* env = std::getenv("CCB_KDD_CSV")) path = env;
  if (path.empty() && std::filesystem::exists("data/kddcup.csv")) path = "data/kddcup.csv";

  auto ordering = [&](const std::string& csv) {
    const double with_ctx = run_sim(kdd_config(csv, true), 7).summaries[0].error_pct;
    const double no_ctx = run_sim(kdd_config(csv, false), 7).summaries[0].error_pct;
    std::ostringstream d;
    d << "CoS(A1 context) error " << with_ctx << "% vs no-context " << no_ctx << "%";
    return std::make_pair(with_ctx < no_ctx, d.str());
  };

  if (path.empty()) {
    report_skip(11, "no KDD file (set CCB_KDD_CSV or place data/kddcup.csv)");
    const auto [ok, detail] = ordering(make_standin_csv());
    std::cout << "criterion 11 (stand-in stream, informational): " << (ok ? "PASS" : "FAIL")
              << " -- " << detail << std::endl;
    return;
  }
  const auto [ok, detail] = ordering(path);
  report(11, ok, detail);
}

// --- criterion 12: byte-identical reruns

void criterion_12() {
  json j = regret_world();
  j["T"] = 10000;
  auto dump = [&](const std::string& path) {
    json jj = j;
    jj["seed"] = 7;
    Simulation sim(parse_config(jj));
    SimResult res = sim.run();
    res.metrics.write_metrics_csv(path);
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = dump("/tmp/ccb_acc_det_a.csv");
  const std::string b = dump("/tmp/ccb_acc_det_b.csv");
  report(12, !a.empty() && a == b,
         "two runs of (config, seed 7) produced byte-identical metrics.csv (" +
             std::to_string(a.size()) + " bytes)");
}

}  // namespace

int main() {
  std::vector<SimResult> cos_runs, dcza_runs;
  const double cos_mean_final = criterion_1(cos_runs);
  criterion_2(cos_mean_final, dcza_runs);
  criterion_3();
  criterion_4(cos_runs, dcza_runs);
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  if (g_failures > 0) {
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all criteria passed" << std::endl;
  return 0;
}
