#pragma once

// Writes a synthetic scenario and runs every pipeline stage on it.

#include <filesystem>

#include "odflow/pipeline.hpp"
#include "odflow/synth.hpp"

namespace runner {

struct Run {
  odflow::PipelineConfig config;
  odflow::MatchResult match;
  odflow::EvalResult eval;
};

inline odflow::PipelineConfig prepare(const odflow::Scenario& sc, const std::filesystem::path& dir) {
  odflow::write_scenario(sc, dir);
  auto cfg = odflow::PipelineConfig::load(dir / "config.json");
  odflow::cmd_build_grid(cfg);
  odflow::cmd_build_dataset(cfg);
  return cfg;
}

inline Run run_all(const odflow::Scenario& sc, const std::filesystem::path& dir,
                   odflow::PredictorKind kind = odflow::PredictorKind::frequency) {
  Run r{prepare(sc, dir), {}, {}};
  r.config.predictor.kind = kind;
  odflow::cmd_train(r.config);
  r.match = odflow::cmd_predict_match(r.config);
  r.eval = odflow::cmd_evaluate(r.config);
  return r;
}

}  // namespace runner
