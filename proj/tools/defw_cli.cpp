// defw: command-line front end for decentralized Frank-Wolfe experiments.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "defw/constraints.hpp"
#include "defw/error.hpp"
#include "defw/harness/config.hpp"
#include "defw/harness/csv.hpp"
#include "defw/harness/datagen.hpp"
#include "defw/harness/experiment.hpp"
#include "defw/harness/rate_fit.hpp"
#include "defw/network.hpp"

namespace fs = std::filesystem;
using defw::harness::json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw defw::ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw defw::ConfigError("write failed for '" + path.string() + "'");
}

std::pair<double, double> parse_window(const std::string& w) {
  const auto colon = w.find(':');
  if (colon == std::string::npos) throw defw::ConfigError("--window must look like lo:hi, got '" + w + "'");
  try {
    return {std::stod(w.substr(0, colon)), std::stod(w.substr(colon + 1))};
  } catch (const std::exception&) {
    throw defw::ConfigError("--window must look like lo:hi with numbers, got '" + w + "'");
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized Frank-Wolfe experiments"};
  app.require_subcommand(1);

  // run
  std::string config_path, out_path, preset = "paper", summary_path;
  std::optional<std::uint64_t> seed;
  std::optional<long> iterations;
  std::size_t threads = 1;
  bool timing = false, quiet = false;
  auto* run = app.add_subcommand("run", "Run an experiment config and write its metrics CSV");
  run->add_option("--config", config_path, "TOML or JSON experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the experiment seed");
  run->add_option("--iterations,-T", iterations, "Override the iteration count");
  run->add_option("--out", out_path, "Metrics CSV path (default: the config's output)");
  run->add_option("--summary", summary_path, "Also write a JSON summary here");
  run->add_option("--threads", threads, "Worker threads for per-agent work")->check(CLI::PositiveNumber);
  run->add_option("--preset", preset, "Defaults the config overrides")->check(CLI::IsMember({"paper", "desk"}));
  run->add_flag("--timing", timing, "Record wall-clock time (makes CSVs run-dependent)");
  run->add_flag("--quiet,-q", quiet, "No progress messages");

  // rates
  std::string rates_input, series = "suboptimality", window = "100:1000";
  auto* rates = app.add_subcommand("rates", "Fit a log-log rate to one column of a metrics CSV");
  rates->add_option("--input", rates_input, "Metrics CSV")->required()->check(CLI::ExistingFile);
  rates->add_option("--series", series, "Column to fit");
  rates->add_option("--window", window, "Iteration window lo:hi");

  // oracle-bench
  std::vector<long> sizes{100, 1000, 10000};
  int repeats = 5;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("oracle-bench", "Time LO oracles against projections");
  bench->add_option("--sizes", sizes, "Problem sizes (l1: d; trace: side of a square matrix)");
  bench->add_option("--repeats", repeats, "Timed calls per size")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "Random seed");

  // datagen
  std::string dg_config, dg_out = "instance", dg_preset = "paper";
  std::optional<std::uint64_t> dg_seed;
  auto* datagen = app.add_subcommand("datagen", "Write the synthetic instance and network of a config to disk");
  datagen->add_option("--config", dg_config, "TOML or JSON experiment config")->required()->check(CLI::ExistingFile);
  datagen->add_option("--out", dg_out, "Output directory");
  datagen->add_option("--seed", dg_seed, "Override the experiment seed");
  datagen->add_option("--preset", dg_preset, "Defaults the config overrides")->check(CLI::IsMember({"paper", "desk"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = defw::harness::load_config(config_path, preset);
      if (seed) cfg.seed = *seed;
      if (iterations) cfg.iterations = *iterations;
      defw::harness::validate(cfg);
      defw::harness::RunContext ctx;
      ctx.threads = threads;
      ctx.timing = timing;
      if (!quiet) ctx.log = [](const std::string& m) { std::cerr << "defw: " << m << '\n'; };
      const auto result = defw::harness::run_experiment(cfg, ctx);
      const fs::path out = out_path.empty() ? fs::path(cfg.output) : fs::path(out_path);
      write_file(out, result.csv);
      if (!summary_path.empty()) write_file(summary_path, result.summary.dump(2) + "\n");
      if (!quiet) std::cerr << "defw: wrote " << out.string() << '\n';
      return 0;
    }
    if (*rates) {
      std::ifstream in(rates_input);
      const auto table = defw::harness::read_metrics_csv(in);
      const auto [lo, hi] = parse_window(window);
      const auto fit = defw::harness::fit_rate(table.series(series), lo, hi,
                                               [](const std::string& m) { std::cerr << "warning: " << m << '\n'; });
      json j{{"series", series},     {"window", {lo, hi}},        {"slope", fit.slope},
             {"intercept", fit.intercept}, {"r_squared", fit.r_squared}, {"points", fit.points},
             {"excluded", fit.excluded}};
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*bench) {
      std::mt19937_64 rng(bench_seed);
      std::normal_distribution<double> normal;
      json rows = json::array();
      for (long n : sizes) {
        if (n < 1) throw defw::ConfigError("--sizes entries must be positive");
        defw::Vector g(n);
        for (auto& v : g) v = normal(rng);
        auto t = std::chrono::steady_clock::now();
        for (int r = 0; r < repeats; ++r) (void)defw::lo_l1(g, 1.0);
        const double lo_l1_ms = elapsed_ms(t) / repeats;
        t = std::chrono::steady_clock::now();
        for (int r = 0; r < repeats; ++r) (void)defw::project_l1(g, 1.0);
        const double proj_l1_ms = elapsed_ms(t) / repeats;

        const long side = std::max(1L, std::min(n, 400L));
        defw::Matrix G(side, side);
        for (Eigen::Index k = 0; k < G.size(); ++k) G.data()[k] = normal(rng);
        t = std::chrono::steady_clock::now();
        for (int r = 0; r < repeats; ++r) (void)defw::lo_trace(G, 1.0);
        const double lo_tr_ms = elapsed_ms(t) / repeats;
        t = std::chrono::steady_clock::now();
        for (int r = 0; r < repeats; ++r) (void)defw::project_trace(G, 1.0);
        const double proj_tr_ms = elapsed_ms(t) / repeats;
        rows.push_back({{"size", n},
                        {"l1_lo_ms", lo_l1_ms},
                        {"l1_projection_ms", proj_l1_ms},
                        {"trace_side", side},
                        {"trace_lo_ms", lo_tr_ms},
                        {"trace_projection_ms", proj_tr_ms}});
      }
      std::cout << rows.dump(2) << '\n';
      return 0;
    }
    if (*datagen) {
      auto cfg = defw::harness::load_config(dg_config, dg_preset);
      if (dg_seed) cfg.seed = *dg_seed;
      const fs::path dir(dg_out);
      fs::create_directories(dir);
      const auto net = defw::harness::build_network(cfg);
      const auto built = defw::harness::build_problem(cfg);
      std::ostringstream topo, weights;
      defw::write_edge_list(topo, net.topology());
      defw::write_weights_csv(weights, net);
      write_file(dir / "topology.txt", topo.str());
      write_file(dir / "weights.csv", weights.str());

      json inst;
      inst["config"] = defw::harness::to_json(cfg);
      inst["radius"] = built.set.radius();
      inst["lambda2"] = net.lambda2();
      inst["theta_true"] = std::vector<double>(built.theta_true.data(), built.theta_true.data() + built.theta_true.size());
      json agents = json::array();
      if (built.problem.is_lasso()) {
        for (const auto& a : built.problem.lasso().agents) {
          json rowsj = json::array();
          for (Eigen::Index r = 0; r < a.A.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(a.A.cols()));
            for (Eigen::Index c = 0; c < a.A.cols(); ++c) row[static_cast<std::size_t>(c)] = a.A(r, c);
            rowsj.push_back(row);
          }
          agents.push_back({{"A", rowsj}, {"y", std::vector<double>(a.y.data(), a.y.data() + a.y.size())}});
        }
      } else {
        for (const auto& a : built.problem.mc().agents) {
          json obs = json::array();
          for (const auto& o : a.observations) obs.push_back({o.row, o.col, o.value});
          agents.push_back({{"observations", obs}});
        }
        json test = json::array();
        for (const auto& o : built.test) test.push_back({o.row, o.col, o.value});
        inst["test"] = test;
      }
      inst["agents"] = agents;
      write_file(dir / "instance.json", inst.dump() + "\n");
      std::cerr << "defw: wrote " << (dir / "instance.json").string() << ", topology.txt, weights.csv\n";
      return 0;
    }
  } catch (const defw::Error& e) {
    std::cerr << "defw: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "defw: unexpected error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
