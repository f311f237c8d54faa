// odflow: cross-city OD flow pipeline driver.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "odflow/error.hpp"
#include "odflow/pipeline.hpp"
#include "odflow/synth.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailed = 1, kBudget = 3 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::size_t> error_budget;
  std::optional<double> alpha;
  std::optional<unsigned> threads;
  std::string truth;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", c.out, "output directory (overrides output_dir)");
  cmd->add_option("--error-budget", c.error_budget, "failed origin entries tolerated");
  cmd->add_option("--alpha", c.alpha, "travel-cost weight");
  cmd->add_option("--threads", c.threads, "matching workers (0 = all cores)");
}

odflow::PipelineConfig load(const Common& c) {
  auto cfg = odflow::PipelineConfig::load(c.config);
  cfg.apply_environment();
  if (!c.out.empty()) cfg.output_dir = fs::absolute(c.out);
  if (c.error_budget) cfg.error_budget = *c.error_budget;
  if (c.alpha) cfg.alpha = *c.alpha;
  if (c.threads) cfg.threads = *c.threads;
  return cfg;
}

std::optional<fs::path> truth_of(const Common& c) {
  if (c.truth.empty()) return std::nullopt;
  return fs::absolute(c.truth);
}

// Runs one pipeline command; the run log is written whether it succeeds or
// not.
template <class F>
int run(const std::string& name, const Common& common, F&& body) {
  std::optional<odflow::PipelineConfig> cfg;
  odflow::RunLog log;
  log.command = name;
  int code = kOk;
  try {
    cfg = load(common);
    log.config_digest = cfg->digest();
    log = body(*cfg);
  } catch (const odflow::BudgetExceeded& e) {
    log.ok = false;
    log.error = e.what();
    code = kBudget;
  } catch (const std::exception& e) {
    log.ok = false;
    log.error = e.what();
    code = kFailed;
  }
  const fs::path out = cfg ? cfg->output_dir : (common.out.empty() ? fs::path{} : fs::path(common.out));
  if (!out.empty()) {
    try {
      odflow::write_run_log(log, out);
    } catch (const std::exception& e) {
      fmt::print(stderr, "odflow {}: cannot write run log: {}\n", name, e.what());
      if (code == kOk) code = kFailed;
    }
  }
  if (code != kOk) {
    fmt::print(stderr, "odflow {}: {}\n", name, log.error);
  } else {
    fmt::print("{}\n", log.summary.dump());
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-city origin-destination flow generation"};
  app.require_subcommand(1);
  Common common;

  auto* grid = app.add_subcommand("grid", "build grids and spatial features for both cities");
  add_common(grid, common);
  auto* dataset = app.add_subcommand("dataset", "export the instruction dataset and the target origin set");
  add_common(dataset, common);
  auto* train = app.add_subcommand("train", "fit the configured predictor");
  add_common(train, common);
  auto* match = app.add_subcommand("match", "predict destinations and write the target OD matrix");
  add_common(match, common);
  auto* eval = app.add_subcommand("eval", "score the predicted OD matrix against ground truth");
  add_common(eval, common);
  eval->add_option("--truth", common.truth, "ground-truth OD CSV (overrides target.truth)");
  auto* sweep = app.add_subcommand("sweep", "evaluate every alpha in loss.alpha_sweep");
  add_common(sweep, common);
  sweep->add_option("--truth", common.truth, "ground-truth OD CSV (overrides target.truth)");

  odflow::ScenarioSpec spec;
  std::string synth_out;
  std::string layout = "permuted";
  auto* synth = app.add_subcommand("synth", "write a synthetic two-city scenario");
  synth->add_option("-o,--out", synth_out, "scenario directory")->required();
  synth->add_option("--rows", spec.rows, "grid rows")->capture_default_str();
  synth->add_option("--cols", spec.cols, "grid columns")->capture_default_str();
  synth->add_option("--cell-size", spec.cell_size_m, "cell size in meters")->capture_default_str();
  synth->add_option("--k", spec.k, "POI categories")->capture_default_str();
  synth->add_option("--hours", spec.hours, "distinct start hours")->capture_default_str();
  synth->add_option("--extra-source-trips", spec.extra_source_trips)->capture_default_str();
  synth->add_option("--target-trips", spec.target_trips)->capture_default_str();
  synth->add_option("--noise", spec.noise, "share of trips with a random destination")->capture_default_str();
  synth->add_option("--layout", layout, "identical or permuted")
      ->check(CLI::IsMember({"identical", "permuted"}))
      ->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*grid) return run("grid", common, [](const auto& c) { return odflow::cmd_build_grid(c).log; });
  if (*dataset) return run("dataset", common, [](const auto& c) { return odflow::cmd_build_dataset(c).log; });
  if (*train) return run("train", common, [](const auto& c) { return odflow::cmd_train(c).log; });
  if (*match) return run("match", common, [](const auto& c) { return odflow::cmd_predict_match(c).log; });
  if (*eval) {
    return run("eval", common, [&](const auto& c) { return odflow::cmd_evaluate(c, truth_of(common)).log; });
  }
  if (*sweep) {
    return run("sweep", common, [&](const auto& c) { return odflow::cmd_alpha_sweep(c, truth_of(common)).log; });
  }
  if (*synth) {
    try {
      spec.layout = layout == "identical" ? odflow::TargetLayout::identical : odflow::TargetLayout::permuted;
      const auto sc = odflow::generate_scenario(spec);
      odflow::write_scenario(sc, synth_out);
      fmt::print("wrote {} ({} cells, layout {}, {} source trips, {} target origins)\n", synth_out,
                 sc.grid().size(), odflow::to_string(sc.symmetry), sc.source.trips.size(), sc.target.trips.size());
    } catch (const std::exception& e) {
      fmt::print(stderr, "odflow synth: {}\n", e.what());
      return kFailed;
    }
  }
  return kOk;
}
