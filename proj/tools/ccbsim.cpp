// ccbsim: seeded experiment runner for the cooperative contextual bandit
// simulator. Subcommands: run, sweep, oracle, report.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccb/ccb.hpp"

namespace fs = std::filesystem;
using namespace ccb;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& spec) {
  std::vector<std::uint64_t> seeds;
  const auto dots = spec.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t a = std::stoull(spec.substr(0, dots));
    const std::uint64_t b = std::stoull(spec.substr(dots + 2));
    for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) seeds.push_back(std::stoull(tok));
  }
  return seeds;
}

void write_manifest(const RunConfig& cfg, const fs::path& dir) {
  std::ofstream out(dir / "run_manifest.json");
  out << cfg.manifest().dump(2) << '\n';
}

SimResult run_one(RunConfig cfg, const fs::path& out_dir, bool quiet) {
  fs::create_directories(out_dir);
  Simulation sim(cfg);
  SimResult res = sim.run();
  res.metrics.write_metrics_csv((out_dir / "metrics.csv").string());
  write_summary_csv(res.summaries, (out_dir / "summary.csv").string(), res.extras);
  write_manifest(cfg, out_dir);
  if (!quiet) {
    for (const LearnerSummary& s : res.summaries) {
      std::cout << "learner " << s.learner << ": slots=" << s.slots
                << " error%=" << s.error_pct << " train%=" << s.training_pct
                << " explore%=" << s.exploration_pct << " exploit%=" << s.exploitation_pct;
      if (s.regret_slope) std::cout << " regret_slope=" << *s.regret_slope;
      std::cout << " cum_exp_regret=" << s.final_cum_expected << '\n';
    }
    for (const auto& [k, v] : res.extras) std::cout << k << "=" << v << '\n';
  }
  return res;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out) {
  RunConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.out_dir = *out;
  run_one(cfg, cfg.out_dir, false);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& seeds_spec,
              std::optional<std::string> out) {
  RunConfig base = load_config(config_path);
  if (out) base.out_dir = *out;
  const std::vector<std::uint64_t> seeds = parse_seed_list(seeds_spec);
  if (seeds.empty()) {
    std::cerr << "sweep: empty seed list\n";
    return 2;
  }
  const fs::path root = base.out_dir;
  fs::create_directories(root);

  // per (learner, metric) value per seed
  std::map<std::pair<int, std::string>, std::vector<double>> table;
  std::ofstream sweep_csv(root / "sweep_summary.csv");
  sweep_csv << "seed,learner,metric,value\n";
  sweep_csv.precision(10);
  for (std::uint64_t s : seeds) {
    RunConfig cfg = base;
    cfg.seed = s;
    SimResult res = run_one(cfg, root / ("seed" + std::to_string(s)), true);
    auto emit = [&](int learner, const std::string& metric, double value) {
      sweep_csv << s << ',' << learner << ',' << metric << ',' << value << '\n';
      table[{learner, metric}].push_back(value);
    };
    for (const LearnerSummary& ls : res.summaries) {
      emit(ls.learner, "error_pct", ls.error_pct);
      emit(ls.learner, "training_pct", ls.training_pct);
      emit(ls.learner, "exploration_pct", ls.exploration_pct);
      emit(ls.learner, "exploitation_pct", ls.exploitation_pct);
      emit(ls.learner, "final_cum_expected_regret", ls.final_cum_expected);
      if (ls.regret_slope) emit(ls.learner, "regret_slope", *ls.regret_slope);
    }
    for (const auto& [k, v] : res.extras) emit(-1, k, v);
  }
  for (const auto& [key, values] : table) {
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    sweep_csv << "mean," << key.first << ',' << key.second << ',' << mean << '\n';
    sweep_csv << "std," << key.first << ',' << key.second << ',' << sd << '\n';
    std::cout << "learner " << key.first << ' ' << key.second << ": mean=" << mean
              << " std=" << sd << " n=" << values.size() << '\n';
  }
  return 0;
}

int cmd_oracle(const std::string& config_path, int grid, std::optional<std::string> out) {
  RunConfig cfg = load_config(config_path);
  if (!cfg.synthetic()) {
    std::cerr << "oracle: only defined for synthetic configs\n";
    return 2;
  }
  Simulation sim(cfg);  // builds the world and the oracle
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (out) {
    file.open(*out);
    os = &file;
  }
  *os << "x,learner,best_arm,net_value\n";
  os->precision(10);
  const int d = cfg.effective_dim();
  Rng grid_rng = make_stream(cfg.seed, Stream::Shared, 0x02ACULL);
  for (int k = 0; k < grid; ++k) {
    Context x;
    if (d == 1) {
      x = Context({grid <= 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(grid - 1)});
    } else {
      std::vector<double> c(static_cast<std::size_t>(d));
      for (double& v : c) v = std::uniform_real_distribution<double>(0.0, 1.0)(grid_rng);
      x = Context(std::move(c));
    }
    std::string xs;
    for (int a = 0; a < d; ++a) xs += (a ? ";" : "") + std::to_string(x[a]);
    for (int i = 0; i < cfg.learner_count(); ++i) {
      const OracleChoice c = sim.oracle().best_arm(i, x);
      *os << xs << ',' << i << ',' << c.arm.label() << ',' << c.net << '\n';
    }
  }
  return 0;
}

int cmd_report(const std::string& dir) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> table;
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != "summary.csv") continue;
    ++files;
    std::ifstream in(entry.path());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string learner, metric, value;
      if (!std::getline(ss, learner, ',') || !std::getline(ss, metric, ',') ||
          !std::getline(ss, value, ','))
        continue;
      try {
        table[{learner, metric}].push_back(std::stod(value));
      } catch (...) {
      }
    }
  }
  if (files == 0) {
    std::cerr << "report: no summary.csv files under " << dir << '\n';
    return 2;
  }
  const fs::path out_path = fs::path(dir) / "report.csv";
  std::ofstream out(out_path);
  out << "learner,metric,mean,std,n\n";
  out.precision(10);
  for (const auto& [key, values] : table) {
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    out << key.first << ',' << key.second << ',' << mean << ',' << sd << ',' << values.size()
        << '\n';
    std::cout << "learner " << key.first << ' ' << key.second << ": mean=" << mean
              << " std=" << sd << " n=" << values.size() << '\n';
  }
  std::cout << "wrote " << out_path.string() << " from " << files << " runs\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cooperative contextual bandit simulator"};
  app.require_subcommand(1);

  std::string config_path, seeds_spec = "1..10", report_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int grid = 1000;

  CLI::App* run = app.add_subcommand("run", "execute one seeded run");
  run->add_option("--config", config_path, "config JSON")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out, "output directory");

  CLI::App* sweep = app.add_subcommand("sweep", "fan out seeds and aggregate");
  sweep->add_option("--config", config_path, "config JSON")->required();
  sweep->add_option("--seeds", seeds_spec, "seed list: 1..10 or 1,2,7");
  sweep->add_option("--out", out, "output directory");

  CLI::App* oracle = app.add_subcommand("oracle", "dump the best-arm map on a grid");
  oracle->add_option("--config", config_path, "config JSON")->required();
  oracle->add_option("--grid", grid, "number of grid points");
  oracle->add_option("--out", out, "output CSV (default stdout)");

  CLI::App* report = app.add_subcommand("report", "merge summary.csv files under a directory");
  report->add_option("dir", report_dir, "directory to scan")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seed, out);
    if (sweep->parsed()) return cmd_sweep(config_path, seeds_spec, out);
    if (oracle->parsed()) return cmd_oracle(config_path, grid, out);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
