#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ccb/ccb.hpp"

using namespace ccb;

namespace {

json base_config() {
  return json::parse(R"({
    "T": 2000, "seed": 3,
    "learners": [
      {"functions": [{"kind":"synthetic","a":0.4,"w":1.0,"phase":0.0},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.25}],
       "costs": {"peer": {"1": 0.1}}},
      {"functions": [{"kind":"synthetic","a":0.4,"w":1.0,"phase":0.125},
                     {"kind":"synthetic","a":0.4,"w":1.0,"phase":0.625}],
       "costs": {"peer": {"0": 0.1}}}
    ],
    "policy": {"policy":"cos","alpha":1.0,"z":0.125},
    "environment": {"d":1,"arrival":{"kind":"iid_uniform"},"correlation":"best",
                    "eta":{"kind":"const","value":0.5}}
  })");
}

std::string trace_of(const SimResult& res) {
  std::ostringstream ss;
  for (const auto& r : res.metrics.rows)
    ss << r.t << '|' << r.learner << '|' << to_string(r.phase) << '|' << r.arm.label() << '|'
       << r.correct << ';';
  return ss.str();
}

SimResult run_json(const json& j) {
  Simulation sim(parse_config(j));
  return sim.run();
}

}  // namespace

TEST_CASE("single learner degenerates to a plain contextual bandit") {
  json j = base_config();
  j["learners"] = json::array({j["learners"][0]});
  j["learners"][0].erase("costs");
  const SimResult res = run_json(j);
  CHECK(res.metrics.rows.size() == 2000);
  for (const auto& r : res.metrics.rows) {
    CHECK(r.arm.is_own());
    CHECK(r.phase != Phase::Training);
  }
}

TEST_CASE("two fresh learners explore first, then train each other") {
  json j = base_config();
  j["policy"]["m_T"] = 1;  // single cell keeps the hand trace exact
  j["T"] = 2;
  const SimResult res = run_json(j);
  REQUIRE(res.metrics.rows.size() == 4);
  // t=1: D1(1)=0, own arm 0 has N=0 <= 0
  CHECK(res.metrics.rows[0].phase == Phase::Exploration);
  CHECK(res.metrics.rows[0].arm == ArmId::own(0));
  CHECK(res.metrics.rows[1].phase == Phase::Exploration);
  CHECK(res.metrics.rows[1].arm == ArmId::own(0));
  // t=2: D1(2)=2^0.125 ln2 = 0.756 < 1 <= D2, N1 := N^k_l - 0 = 1 <= 1.51
  CHECK(res.metrics.rows[2].phase == Phase::Exploration);  // own arm 1 still gated
  CHECK(res.metrics.rows[2].arm == ArmId::own(1));
}

TEST_CASE("mutual training happens once own arms clear the gate") {
  json j = base_config();
  j["policy"]["m_T"] = 1;
  j["policy"]["F_max"] = 2;  // known upper bound, larger than the actual 1
  j["learners"][0]["functions"] = json::array({j["learners"][0]["functions"][0]});
  j["learners"][1]["functions"] = json::array({j["learners"][1]["functions"][0]});
  j["T"] = 2;
  const SimResult res = run_json(j);
  REQUIRE(res.metrics.rows.size() == 4);
  CHECK(res.metrics.rows[0].phase == Phase::Exploration);
  CHECK(res.metrics.rows[1].phase == Phase::Exploration);
  // t=2: own N=1 > D1(2)=0.756; stale N1=0 <= D2=1.51; refresh N1 := 1 <= D2
  CHECK(res.metrics.rows[2].phase == Phase::Training);
  CHECK(res.metrics.rows[2].arm == ArmId::peer(1));
  CHECK(res.metrics.rows[3].phase == Phase::Training);
  CHECK(res.metrics.rows[3].arm == ArmId::peer(0));
}

TEST_CASE("identical seed and config reproduce the run byte for byte") {
  for (const char* pol : {"cos", "dcza"}) {
    json j = base_config();
    j["policy"]["policy"] = pol;
    Simulation a(parse_config(j)), b(parse_config(j));
    const SimResult ra = a.run(), rb = b.run();
    ra.metrics.write_metrics_csv("/tmp/ccb_det_a.csv");
    rb.metrics.write_metrics_csv("/tmp/ccb_det_b.csv");
    std::ifstream fa("/tmp/ccb_det_a.csv"), fb("/tmp/ccb_det_b.csv");
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    REQUIRE(sa.str() == sb.str());
    REQUIRE_FALSE(sa.str().empty());
  }
}

TEST_CASE("adding a peerless learner does not perturb the first learner") {
  json solo = base_config();
  solo["learners"] = json::array({solo["learners"][0]});
  solo["learners"][0].erase("costs");
  solo["environment"]["correlation"] = "independent";
  const SimResult r1 = run_json(solo);

  json pair = base_config();
  pair["environment"]["correlation"] = "independent";
  pair["learners"][0].erase("costs");
  pair["learners"][1].erase("costs");
  pair["topology"] = {{"edges", json::array()}};  // unreachable: no peer arms
  const SimResult r2 = run_json(pair);

  std::ostringstream t1, t2;
  for (const auto& r : r1.metrics.rows)
    t1 << r.t << to_string(r.phase) << r.arm.label() << r.correct;
  for (const auto& r : r2.metrics.rows)
    if (r.learner == 0) t2 << r.t << to_string(r.phase) << r.arm.label() << r.correct;
  CHECK(t1.str() == t2.str());
}

TEST_CASE("exploration and training selections respect the control budgets") {
  json j = base_config();
  j["T"] = 5000;
  const RunConfig cfg = parse_config(j);
  Simulation sim(cfg);
  const SimResult res = sim.run();
  const auto D_end = control_values(cfg.T, cfg.controls);
  std::map<std::tuple<int, std::string, std::string>, std::int64_t> explo, train;
  for (const auto& r : res.metrics.rows) {
    if (r.phase == Phase::Exploration) explo[{r.learner, r.cell, r.arm.label()}] += 1;
    if (r.phase == Phase::Training) train[{r.learner, r.cell, r.arm.label()}] += 1;
  }
  for (const auto& [key, n] : explo) {
    const bool own = std::get<2>(key)[0] == 'f';
    const double bound = own ? D_end.D1 : D_end.D3;
    REQUIRE(n <= static_cast<std::int64_t>(std::ceil(bound)) + 1);
  }
  for (const auto& [key, n] : train)
    REQUIRE(n <= static_cast<std::int64_t>(std::ceil(D_end.D2)) + 1);
}

TEST_CASE("exploitation iff the refreshed under-explored set is empty (one peer)") {
  json j = base_config();
  j["T"] = 3000;
  const SimResult res = run_json(j);
  std::int64_t exploit_rows = 0;
  for (const auto& r : res.metrics.rows) {
    if (r.phase == Phase::Exploitation) {
      REQUIRE(r.set_empty_post);
      ++exploit_rows;
    } else {
      REQUIRE_FALSE(r.set_empty_pre);
    }
    if (r.set_empty_pre) REQUIRE(r.phase == Phase::Exploitation);
  }
  CHECK(exploit_rows > 0);
}

TEST_CASE("sample means replay exactly from the event log (single learner)") {
  json j = base_config();
  j["learners"] = json::array({j["learners"][0]});
  j["learners"][0].erase("costs");
  j["T"] = 4000;
  const RunConfig cfg = parse_config(j);
  Simulation sim(cfg);
  const SimResult res = sim.run();
  std::map<std::pair<std::string, std::string>, std::vector<double>> rewards;
  for (const auto& r : res.metrics.rows)
    if (r.phase != Phase::Training) rewards[{r.cell, r.arm.label()}].push_back((r.correct ? 1.0 : 0.0) - r.cost);
  const CosState& st = *sim.learner(0).cos;
  for (const auto& [key, rs] : rewards) {
    const std::int64_t cell = std::stoll(key.first);
    const int slot = std::stoi(key.second.substr(1));
    double mean = 0;
    for (double v : rs) mean += v;
    mean /= static_cast<double>(rs.size());
    REQUIRE(st.cell(cell).arms[static_cast<std::size_t>(slot)].n ==
            static_cast<std::int64_t>(rs.size()));
    REQUIRE(st.cell(cell).arms[static_cast<std::size_t>(slot)].mean ==
            Catch::Approx(mean).margin(1e-12));
  }
}

TEST_CASE("an explicit zero-delay buffer reproduces the default trace") {
  json j = base_config();
  const SimResult plain = run_json(j);
  j["delay"] = {{"L_max", 0}};
  const SimResult delayed = run_json(j);
  CHECK(trace_of(plain) == trace_of(delayed));
}

TEST_CASE("cos-mc with d = 1 matches plain cos slot for slot") {
  json j = base_config();
  j["T"] = 3000;
  j["policy"]["m_T"] = 6;  // shared by both policies
  const SimResult cos = run_json(j);
  j["policy"]["policy"] = "cos_mc";
  const SimResult mc = run_json(j);
  REQUIRE(cos.metrics.rows.size() == mc.metrics.rows.size());
  for (std::size_t i = 0; i < cos.metrics.rows.size(); ++i) {
    REQUIRE(cos.metrics.rows[i].phase == mc.metrics.rows[i].phase);
    REQUIRE(cos.metrics.rows[i].arm == mc.metrics.rows[i].arm);
    REQUIRE(cos.metrics.rows[i].correct == mc.metrics.rows[i].correct);
  }
}

TEST_CASE("batch slots freeze counters and apply updates at the end") {
  SECTION("fresh batch of three explores the first arm three times") {
    json j = base_config();
    j["T"] = 1;
    j["batch"] = 3;
    j["policy"]["m_T"] = 1;
    const RunConfig cfg = parse_config(j);
    Simulation sim(cfg);
    const SimResult res = sim.run();
    REQUIRE(res.metrics.rows.size() == 6);  // 2 learners x 3 items
    for (const auto& r : res.metrics.rows) {
      CHECK(r.phase == Phase::Exploration);
      CHECK(r.arm == ArmId::own(0));
    }
    // counters after the slot equal the sequential totals of the batch
    CHECK(sim.learner(0).cos->cell(0).arms[0].n == 3);
    CHECK(sim.learner(0).cos->arrival_count(0) == 3);
  }
  SECTION("batch size one equals sequential mode") {
    json j = base_config();
    j["T"] = 500;
    const SimResult seq = run_json(j);
    j["batch"] = 1;
    const SimResult batched = run_json(j);
    CHECK(trace_of(seq) == trace_of(batched));
  }
}

TEST_CASE("missing labels leave selections emitted but nothing recorded") {
  json j = base_config();
  j["p_r"] = 0.0;
  j["T"] = 300;
  const RunConfig cfg = parse_config(j);
  Simulation sim(cfg);
  const SimResult res = sim.run();
  CHECK(res.metrics.rows.size() == 600);
  const CosState& st = *sim.learner(0).cos;
  for (std::int64_t c = 0; c < st.partition().cell_count(); ++c) {
    CHECK(st.arrival_count(c) == 0);
    for (const auto& a : st.cell(c).arms) CHECK(a.n == 0);
  }
}

TEST_CASE("unsupervised learners ride on their peers' estimates") {
  json j = base_config();
  j["unsupervised"] = json::array({0});
  j["T"] = 1;
  const SimResult first = run_json(j);
  // all peers report no data on slot one: first own arm by the tie rule
  CHECK(first.metrics.rows[0].arm == ArmId::own(0));
  CHECK(first.metrics.rows[0].phase == Phase::Exploitation);
}

TEST_CASE("unsupervised accuracy approaches the oracle on a shared stream") {
  // the unsupervised learner's own functions are uninformative; the peer's
  // best function is a flat 0.9. Five seeds, long-run accuracy within 0.05.
  json j = json::parse(R"({
    "T": 10000,
    "learners": [
      {"functions": [{"kind":"synthetic","a":0.05,"w":1.0,"phase":0.0,"clip":[0.45,0.55]}],
       "costs": {"peer": {"1": 0.0}}},
      {"functions": [{"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.9,0.9]},
                     {"kind":"synthetic","a":0.1,"w":1.0,"phase":0.0,"clip":[0.6,0.6]}],
       "costs": {"peer": {"0": 0.0}}}
    ],
    "policy": {"policy":"cos","alpha":1.0,"z":0.125},
    "environment": {"d":1,"arrival":{"kind":"iid_uniform"},"correlation":"best",
                    "eta":{"kind":"const","value":0.5}},
    "unsupervised": [0]
  })");
  int pass = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    j["seed"] = seed;
    const SimResult res = run_json(j);
    std::int64_t correct = 0, n = 0;
    for (const auto& r : res.metrics.rows) {
      if (r.learner != 0 || r.t <= 5000) continue;
      ++n;
      correct += r.correct;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(n);
    if (0.9 - acc <= 0.05) ++pass;
  }
  CHECK(pass == 5);
}

TEST_CASE("peer-query faults abort the slot and the run recovers") {
  json j = base_config();
  j["T"] = 60;
  j["policy"]["m_T"] = 1;
  RunConfig cfg = parse_config(j);
  Simulation sim(cfg);
  for (std::int64_t t = 2; t <= 20; ++t) sim.inject_peer_fault(0, t);
  const SimResult res = sim.run();
  std::int64_t aborted = 0, later_ok = 0;
  for (const auto& r : res.metrics.rows) {
    if (r.learner == 0 && r.phase == Phase::Aborted) ++aborted;
    if (r.learner == 0 && r.t > 20 && r.phase != Phase::Aborted) ++later_ok;
  }
  CHECK(aborted > 0);
  CHECK(later_ok == 40);
}

TEST_CASE("context-only replies come from the peer's label histogram") {
  json j = base_config();
  j["context_only"] = true;
  j["T"] = 800;
  j["environment"]["eta"] = {{"kind", "step"}, {"threshold", 0.5}, {"low", 0.1}, {"high", 0.9}};
  const SimResult res = run_json(j);
  CHECK(res.metrics.rows.size() == 1600);
  // determinism under the mode
  const SimResult res2 = run_json(j);
  CHECK(trace_of(res) == trace_of(res2));
}

TEST_CASE("ensemble mode reports the combined error") {
  json j = base_config();
  j["ensemble"] = {{"mode", "sgd"}, {"per_cell", false}};
  j["T"] = 1500;
  const SimResult res = run_json(j);
  bool found = false;
  for (const auto& [k, v] : res.extras) {
    if (k == "ensemble_error_pct") {
      found = true;
      CHECK(v >= 0.0);
      CHECK(v <= 60.0);
    }
  }
  CHECK(found);
  // learners are restricted to their own functions
  for (const auto& r : res.metrics.rows) CHECK(r.arm.is_own());
}

TEST_CASE("a zero-horizon run exits cleanly with empty metrics") {
  json j = base_config();
  j["T"] = 0;
  const SimResult res = run_json(j);
  CHECK(res.metrics.rows.empty());
  CHECK(res.summaries[0].slots == 0);
}

TEST_CASE("delayed labels all mature within L_max slots of selection") {
  json j = base_config();
  j["delay"] = {{"L_max", 5}};
  j["T"] = 2000;
  const RunConfig cfg = parse_config(j);
  Simulation sim(cfg);
  const SimResult res = sim.run();
  // post-run: nothing older than L_max is still pending, and the learners'
  // labeled counts account for everything revealed up to T - L_max
  CHECK(res.metrics.rows.size() == 4000);
  const CosState& st = *sim.learner(0).cos;
  std::int64_t labeled = 0;
  for (std::int64_t c = 0; c < st.partition().cell_count(); ++c) labeled += st.arrival_count(c);
  CHECK(labeled >= 2000 - 5);
}

TEST_CASE("whenever a learner holds training stats for a cube, the peer has it") {
  json j = base_config();
  j["policy"] = {{"policy", "dcza"}, {"alpha", 1.0}, {"A", 1.0}, {"z", 0.125}};
  j["T"] = 3000;
  const RunConfig cfg = parse_config(j);
  Simulation sim(cfg);
  sim.run();
  for (int i = 0; i < 2; ++i) {
    const DczaState& mine = *sim.learner(i).dcza;
    const DczaState& peer = *sim.learner(1 - i).dcza;
    for (const auto& [cube, cs] : mine.all_stats()) {
      if (cs.n1[0] > 0 || cs.arms[mine.own_count()].n > 0)
        REQUIRE(peer.peer_count(cube).has_value());
    }
  }
}

TEST_CASE("cumulative expected regret never decreases in synthetic mode") {
  json j = base_config();
  j["T"] = 3000;
  const SimResult res = run_json(j);
  for (const auto& series : res.metrics.cum_expected) {
    for (std::size_t t = 1; t < series.size(); ++t) REQUIRE(series[t] >= series[t - 1] - 1e-12);
  }
}

TEST_CASE("appending time as a context coordinate adjusts the defaults") {
  json j = base_config();
  j["T"] = 20000;
  j["environment"]["append_time"] = true;
  j["policy"] = {{"policy", "cos"}, {"alpha", 1.0}};
  for (auto& L : j["learners"])
    for (auto& f : L["functions"]) f["w"] = json::array({1.0, 0.0});
  const RunConfig cfg = parse_config(j);
  // z = 2a/(3a+d+1) and m_T = ceil(T^(1/(3a+d+1))) with d_eff = 2
  CHECK(cfg.controls.z1 == Catch::Approx(0.4));
  CHECK(cfg.resolved_m_T == static_cast<int>(std::ceil(std::pow(20000.0, 0.2))));
  json j2 = j;
  j2["T"] = 300;
  const SimResult res = run_json(j2);
  CHECK(res.metrics.rows.size() == 600);
}

TEST_CASE("config validation reports the offending field") {
  json j = base_config();
  SECTION("z outside (0,1)") {
    j["policy"]["z"] = 1.5;
    CHECK_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("policy.z"));
  }
  SECTION("p_r outside [0,1]") {
    j["p_r"] = 1.5;
    CHECK_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("p_r"));
  }
  SECTION("cost outside [0,1]") {
    j["learners"][0]["costs"]["own"] = json::array({0.5, 1.2});
    CHECK_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("costs.own"));
  }
  SECTION("m_T below 1") {
    j["policy"]["m_T"] = 0;
    CHECK_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("m_T"));
  }
}
