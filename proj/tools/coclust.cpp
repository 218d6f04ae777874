// Command-line front end: synth, train, eval, report, gradcheck, aggregate.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "coclust/config.hpp"
#include "coclust/error.hpp"
#include "coclust/gradcheck_suite.hpp"
#include "coclust/io.hpp"
#include "coclust/run.hpp"
#include "coclust/synthetic.hpp"

namespace fs = std::filesystem;
using namespace coclust;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumerical = 3;

int cmd_synth(const fs::path& spec_path, const fs::path& out) {
  const SyntheticSpec spec = parse_synthetic_spec(read_text_file(spec_path), spec_path.string());
  const SyntheticData data = generate_synthetic(spec);
  write_synthetic(out, data);
  std::cout << "wrote " << data.visits.size() << " visits and " << data.descriptions.size()
            << " concepts to " << out.string() << "\n";
  return 0;
}

int cmd_train(const fs::path& data, const std::optional<fs::path>& config_path,
              std::optional<std::uint64_t> seed, const fs::path& out) {
  RunConfig config = config_path ? load_run_config(*config_path) : RunConfig{};
  if (!config_path) {
    config.model.input_dim = 0;
    config.model.label_width = 0;
  }
  if (seed) config.train.seed = *seed;
  const auto start = std::chrono::steady_clock::now();
  RunOutcome outcome = run_training(data, config, out);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "best epoch " << outcome.training.best_epoch << " of "
            << outcome.config.train.epochs << " (" << seconds << " s)\n";
  std::cout << to_json(outcome.test).dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& module) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  for (const SuiteCheck& c : run_gradcheck_suite(module)) {
    std::printf("%-28s %s  coords=%zu kinks=%zu max_rel_error=%.3e", c.name.c_str(),
                c.report.passed ? "ok  " : "FAIL", c.report.coordinates, c.report.kinks,
                c.report.max_rel_error);
    if (!c.report.passed) {
      std::printf("  worst=%s[%zu] analytic=%.6e numeric=%.6e", c.report.worst.param.c_str(),
                  c.report.worst.index, c.report.worst.analytic, c.report.worst.numeric);
    }
    std::printf("\n");
    ok = ok && c.report.passed;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("gradcheck %s in %.2f s\n", ok ? "passed" : "failed", seconds);
  return ok ? 0 : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-guided co-clustering of concepts and visits on a hypergraph"};
  app.require_subcommand(1);

  fs::path spec_path, synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a planted-subtype dataset");
  synth->add_option("--spec", spec_path, "Generator spec (key = value)")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  fs::path data_dir, train_out;
  std::optional<fs::path> config_path;
  std::optional<std::uint64_t> seed;
  auto* train = app.add_subcommand("train", "Train a model and write a run directory");
  train->add_option("--data", data_dir, "Directory with visits.jsonl")->required();
  train->add_option("--config", config_path, "Run config (key = value)");
  train->add_option("--seed", seed, "Overrides the config seed");
  train->add_option("--out", train_out, "Run directory")->required();

  fs::path eval_dir;
  std::string split = "test";
  auto* eval = app.add_subcommand("eval", "Evaluate the best checkpoint of a run");
  eval->add_option("--rundir", eval_dir, "Run directory")->required();
  eval->add_option("--split", split, "train, validation or test");

  fs::path report_dir;
  std::size_t top_concepts = 15, top_visits = 3;
  auto* report = app.add_subcommand("report", "Export the cluster report of a run");
  report->add_option("--rundir", report_dir, "Run directory")->required();
  report->add_option("--top-concepts", top_concepts, "Concepts per cluster");
  report->add_option("--top-visits", top_visits, "Visits per cluster");

  std::string module = "all";
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare gradients with finite differences");
  gradcheck->add_option("--module", module, "all, transformer, cluster or align");

  std::string runs;
  auto* aggregate = app.add_subcommand("aggregate", "Mean and std of test metrics over runs");
  aggregate->add_option("--runs", runs, "Glob of run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*synth) return cmd_synth(spec_path, synth_out);
    if (*train) return cmd_train(data_dir, config_path, seed, train_out);
    if (*eval) {
      std::cout << to_json(evaluate_run(eval_dir, split)).dump(2) << "\n";
      return 0;
    }
    if (*report) {
      std::cout << to_table(report_run(report_dir, top_concepts, top_visits));
      return 0;
    }
    if (*gradcheck) return cmd_gradcheck(module);
    if (*aggregate) {
      std::vector<fs::path> dirs;
      const auto summary = aggregate_runs(runs, &dirs);
      std::cout << "runs: " << dirs.size() << "\n" << format_summary(summary);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
