#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depaint/checkpoint.hpp"
#include "depaint/config.hpp"
#include "depaint/selfcheck.hpp"
#include "depaint/trainer.hpp"

namespace {

using namespace depaint;

// DEPAINT_SEED wins over --seed when set.
std::uint64_t resolve_seed(std::uint64_t flag, bool flag_given, std::uint64_t fallback)
{
  if (const char* env = std::getenv("DEPAINT_SEED"); env && *env) {
    try {
      return detail::to_unsigned("DEPAINT_SEED", env);
    } catch (const ConfigError& e) {
      throw std::runtime_error(e.what());
    }
  }
  return flag_given ? flag : fallback;
}

RunConfig load(const std::string& path) { return path.empty() ? parse_config_text("") : parse_config(path); }

void write_text(const std::string& path, const std::string& text)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

int cmd_run(const std::string& config, std::uint64_t seed, bool seed_given, std::string out, const std::string& checkpoint,
            std::size_t workers)
{
  RunConfig cfg = load(config);
  cfg.seed = resolve_seed(seed, seed_given, cfg.seed);
  if (workers > 0) cfg.workers = workers;
  if (out.empty()) out = cfg.output;
  if (out.empty()) throw std::runtime_error("no output path: pass --out or set 'output' in the config");
  const TrainResult res = train(cfg);
  write_metrics_csv(out, res.metrics);
  if (!checkpoint.empty()) save_checkpoints(checkpoint, res.params);
  const MetricsRecord& last = res.metrics.back();
  std::printf("wrote %zu rows to %s (final obj_return %.4f, peak_violation_rate %.4f, mean_lambda %.4f)\n", res.metrics.size(),
              out.c_str(), last.obj_return, last.peak_violation_rate, last.mean_lambda);
  return 0;
}

int cmd_eval(const std::string& config, const std::string& checkpoint, std::size_t episodes, std::uint64_t seed, bool seed_given)
{
  const RunConfig cfg = load(config);
  const ParticleGame game(cfg.env);
  std::vector<JointParams> params;
  if (checkpoint.empty()) {
    // Untrained shared initialization, for a baseline comparison.
    Rng init = derive_rng(cfg.seed, 0, Phase::initialize);
    std::vector<MlpParams> slices;
    for (std::size_t k = 0; k < game.n_agents(); ++k) slices.push_back(initial_params(MlpShape::policy(), init));
    params.assign(game.n_agents(), JointParams::concatenate(slices));
  } else {
    params = load_checkpoints(checkpoint);
  }
  Rng rng = derive_rng(resolve_seed(seed, seed_given, cfg.seed), 0, Phase::evaluate);
  const EvalResult r = evaluate(params, game, episodes, cfg.horizon, rng, cfg.constraint);
  std::printf("obj_return,util_return,peak_violation_rate\n%.9g,%.9g,%.9g\n", r.objective, r.utility, r.violation_rate);
  return 0;
}

int cmd_preset(const std::string& name, const std::string& config, const std::string& out_dir, std::vector<std::uint64_t> seeds)
{
  const ExperimentPreset preset = make_preset(name, load(config));
  if (seeds.empty()) seeds = preset.seeds;
  std::filesystem::create_directories(out_dir);
  for (const auto& run : preset.runs) {
    for (std::uint64_t s : seeds) {
      RunConfig cfg = run.config;
      cfg.seed = s;
      const std::string path = (std::filesystem::path(out_dir) / (run.label + "_seed" + std::to_string(s) + ".csv")).string();
      write_metrics_csv(path, train(cfg).metrics);
      std::printf("%s\n", path.c_str());
      std::fflush(stdout);
    }
  }
  return 0;
}

int cmd_verify()
{
  bool ok = true;
  for (const CheckResult& c : run_self_checks()) {
    std::printf("[%s] %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Decentralized constrained multi-agent policy gradient"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string checkpoint;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::size_t episodes = 100;
  std::string preset_name;
  std::string out_dir = "preset_out";
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> inputs;

  auto* run = app.add_subcommand("run", "Train and write a metrics CSV");
  run->add_option("--config", config, "Config file (key = value lines)")->check(CLI::ExistingFile);
  auto* run_seed = run->add_option("--seed", seed, "Random seed (DEPAINT_SEED overrides)");
  run->add_option("--out", out, "Metrics CSV path");
  run->add_option("--checkpoint", checkpoint, "Also save final parameters here");
  run->add_option("--workers", workers, "Worker threads (default from config)");

  auto* ev = app.add_subcommand("eval", "Evaluate saved (or initial) parameters");
  ev->add_option("--config", config, "Config file")->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", checkpoint, "Checkpoint written by run; omit for the untrained policy");
  ev->add_option("--episodes", episodes, "Episodes to average")->check(CLI::PositiveNumber);
  auto* ev_seed = ev->add_option("--seed", seed, "Random seed (DEPAINT_SEED overrides)");

  auto* pre = app.add_subcommand("preset", "Run a named experiment grid sequentially");
  pre->add_option("name", preset_name, "coop-nav | predator-prey | ablation-momentum")->required();
  pre->add_option("--config", config, "Base config for every run")->check(CLI::ExistingFile);
  pre->add_option("--out-dir", out_dir, "Directory for the CSVs");
  pre->add_option("--seeds", seeds, "Seeds (default 0 1 2 3 4)");

  auto* verify = app.add_subcommand("verify", "Run the invariant self-checks");

  auto* avg = app.add_subcommand("average", "Row-wise mean of per-seed CSVs");
  avg->add_option("inputs", inputs, "CSV files")->required()->check(CLI::ExistingFile);
  avg->add_option("--out", out, "Output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, seed, run_seed->count() > 0, out, checkpoint, workers);
    if (*ev) return cmd_eval(config, checkpoint, episodes, seed, ev_seed->count() > 0);
    if (*pre) return cmd_preset(preset_name, config, out_dir, seeds);
    if (*verify) return cmd_verify();
    if (*avg) {
      const std::string text = average_seeds(inputs);
      if (out.empty())
        std::cout << text;
      else
        write_text(out, text);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
