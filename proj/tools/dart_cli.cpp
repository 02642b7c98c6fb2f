#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dart/harness.hpp"
#include "dart/serialize.hpp"

namespace {

dart::ExperimentConfig resolve_config(const std::string& config_path,
                                      const std::string& preset) {
  if (!preset.empty()) return dart::preset_config(preset);
  if (config_path.empty())
    throw dart::ConfigError("pass a config file or --preset <name>");
  return dart::load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DART noise-injection imitation learning harness"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir, curves_out;
  std::vector<uint64_t> seed_override;
  int jobs = 1;

  auto add_run_options = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config) {
      cmd->add_option("config", config_path, "experiment config (JSON)");
      cmd->add_option("--preset", preset,
                      "built-in config: pointmass-compare | grid-compare");
    }
    cmd->add_option("--seed-override", seed_override,
                    "replace the config's seed list");
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--jobs", jobs, "parallel (algorithm, seed) runs")
        ->check(CLI::Range(1, 64));
  };

  CLI::App* run_cmd =
      app.add_subcommand("run", "run an experiment and write results");
  add_run_options(run_cmd, true);

  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle", "run the estimator/bound verification suite");

  std::string results_path, metric;
  CLI::App* curves_cmd = app.add_subcommand(
      "curves", "aggregate per-algorithm learning curves from results");
  curves_cmd->add_option("results", results_path, "results.csv path")
      ->required();
  curves_cmd->add_option("metric", metric, "metric name to aggregate")
      ->required();
  curves_cmd->add_option("--out", curves_out,
                         "output file (default: curves_<metric>.csv next to "
                         "the results file)");

  CLI::App* ablation_cmd = app.add_subcommand(
      "ablation", "random-covariance (Wishart) noise ablation");
  add_run_options(ablation_cmd, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      dart::RunOptions options;
      options.out_dir_override = out_dir;
      options.seed_override = seed_override;
      options.jobs = jobs;
      const auto config = resolve_config(config_path, preset);
      const auto result = dart::run_experiment(config, options);
      std::cout << "wrote " << result.rows.size() << " metric rows to "
                << result.output_dir << "/results.csv\n";
      return 0;
    }
    if (oracle_cmd->parsed()) {
      const auto report = dart::run_oracle_suite();
      std::cout << dart::oracle_report_to_text(report);
      return report.all_pass ? 0 : 1;
    }
    if (curves_cmd->parsed()) {
      const std::string csv = dart::read_file(results_path);
      const auto points = dart::compute_curves(csv, metric);
      std::string out_path = curves_out;
      if (out_path.empty()) {
        const auto slash = results_path.find_last_of('/');
        const std::string dir =
            slash == std::string::npos ? std::string(".")
                                       : results_path.substr(0, slash);
        out_path = dir + "/curves_" + metric + ".csv";
      }
      dart::write_file(out_path, dart::curves_to_csv(points));
      std::cout << "wrote " << points.size() << " curve points to "
                << out_path << "\n";
      return 0;
    }
    if (ablation_cmd->parsed()) {
      dart::RunOptions options;
      options.out_dir_override = out_dir;
      options.seed_override = seed_override;
      options.jobs = jobs;
      const auto config = resolve_config(config_path, preset);
      const auto ablation = dart::wishart_ablation(config, options);
      std::cout << "dart mean shift " << ablation.dart_mean_shift << " (sd "
                << ablation.dart_shift_sd << ")\n"
                << "matched-trace mean shift " << ablation.matched_mean_shift
                << (ablation.matched_within_band ? " (within band)"
                                                 : " (OUTSIDE band)")
                << "\n"
                << "collection reward: bc "
                << ablation.bc_mean_collection_reward << ", 100x trace "
                << ablation.high_mean_collection_reward
                << (ablation.high_reward_below_bc ? " (degraded)"
                                                  : " (NOT degraded)")
                << "\n"
                << "results in " << ablation.result.output_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
