// Command-line front end: train / verify / report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hacpo/harness.hpp"
#include "hacpo/oracle.hpp"

namespace {

int log_level() {
  const char* env = std::getenv("HACPO_LOG");
  if (!env) return 1;
  const std::string v(env);
  if (v == "quiet") return 0;
  if (v == "debug") return 2;
  return 1;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
  hacpo::RunConfig cfg = hacpo::load_config(config_path);
  if (seed_override) cfg.seed = *seed_override;
  const std::filesystem::path out(out_dir);
  const auto reports = hacpo::execute_run(cfg, out);
  if (log_level() >= 1) {
    std::cerr << "trained " << reports.size() << " steps, mode " << hacpo::to_string(cfg.mode)
              << ", seed " << cfg.seed << "\n";
    if (!reports.empty()) {
      std::cerr << "final mean rewards:";
      for (const auto& st : reports.back().per_agent) std::cerr << ' ' << st.mean_reward;
      std::cerr << "\n";
    }
    std::cerr << "wrote " << (out / "metrics.jsonl").string() << "\n";
  }
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, bool adversarial,
               long long mc_trials, int alignment_trials, int gradient_trials) {
  hacpo::SuiteOptions opt;
  opt.seed = seed;
  opt.adversarial_tracker = adversarial;
  opt.mc_trials = mc_trials;
  opt.alignment_trials = alignment_trials;
  opt.gradient_trials = gradient_trials;
  const auto reports = hacpo::run_verification_suite(suite, opt);
  bool all_passed = true;
  for (const auto& r : reports) {
    std::cout << hacpo::verification_report_to_json(r).dump() << "\n";
    all_passed = all_passed && r.passed;
  }
  return all_passed ? 0 : 1;
}

int cmd_report(const std::string& runs_dir) {
  const std::filesystem::path dir(runs_dir);
  const auto summaries = hacpo::collect_runs(dir);
  std::cout << hacpo::render_report(summaries);
  hacpo::write_plot_csv(dir, dir / "plot_data.csv");
  if (log_level() >= 1)
    std::cerr << "wrote " << (dir / "plot_data.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterogeneous-agent collaborative policy optimization, desk scale"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run a training configuration");
  std::string config_path;
  std::string out_dir = "run_out";
  std::optional<std::uint64_t> seed_override;
  train->add_option("--config", config_path, "path to a run config (json)")->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--seed", seed_override, "override the config seed");

  auto* verify = app.add_subcommand("verify", "run a verification suite");
  std::string suite;
  std::uint64_t verify_seed = 1;
  bool adversarial = false;
  long long mc_trials = 100000;
  int alignment_trials = 200;
  int gradient_trials = 100;
  verify->add_option("--suite", suite, "unbiasedness|corollary|alignment|gradients|all")
      ->required();
  verify->add_option("--seed", verify_seed, "suite seed");
  verify->add_flag("--adversarial-tracker", adversarial,
                   "perturb capability ratios 2x (negative control; exits nonzero by design)");
  verify->add_option("--mc-trials", mc_trials, "Monte Carlo groups per estimator check");
  verify->add_option("--alignment-trials", alignment_trials, "alignment instantiations");
  verify->add_option("--gradient-trials", gradient_trials, "gradient-check instances");

  auto* report = app.add_subcommand("report", "summarize completed runs");
  std::string runs_dir;
  report->add_option("--runs", runs_dir, "directory of completed runs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config_path, out_dir, seed_override);
    if (*verify)
      return cmd_verify(suite, verify_seed, adversarial, mc_trials, alignment_trials,
                        gradient_trials);
    if (*report) return cmd_report(runs_dir);
  } catch (const hacpo::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const hacpo::invalid_input_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const hacpo::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
