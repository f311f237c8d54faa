#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "odflow/endpoint.hpp"
#include "odflow/eval.hpp"
#include "odflow/gravity.hpp"
#include "odflow/grid.hpp"
#include "odflow/loss.hpp"
#include "odflow/matching.hpp"
#include "odflow/od_matrix.hpp"

namespace odflow {

struct CityConfig {
  std::string name;
  GeoBounds bounds;
  double cell_size_m = 0.0;
  std::filesystem::path pois;
  std::filesystem::path trips;    ///< source: full trips
  std::filesystem::path origins;  ///< target: trip-shaped file, destinations ignored
  std::filesystem::path truth;    ///< target: ground-truth OD CSV, optional
};

enum class PredictorKind { frequency, gravity, endpoint };

struct PredictorConfig {
  PredictorKind kind = PredictorKind::frequency;
  EndpointConfig endpoint;
  GravityParams gravity;
  /// Fit beta on the source city's observed OD matrix before transfer.
  bool calibrate_beta = false;
  std::vector<double> beta_grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
};

/// Everything one pipeline run needs. Relative paths in the JSON file are
/// resolved against the file's directory.
struct PipelineConfig {
  std::filesystem::path vocabulary;  ///< empty selects the standard vocabulary
  CityConfig source;
  CityConfig target;
  PredictorConfig predictor;
  std::vector<double> loss_weights;  ///< empty means unit weights
  double alpha = 1.0;
  std::vector<double> alpha_sweep;
  MatchPolicy match;
  std::size_t error_budget = 0;
  unsigned threads = 0;
  std::size_t n_bins = 10;
  std::size_t top_k_arcs = 100;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;

  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);

  /// Replaces the endpoint URL with $ODFLOW_ENDPOINT_URL when it is set.
  void apply_environment();

  /// Throws ConfigError. Does not touch the file system.
  void validate() const;

  /// Canonical JSON of every setting except output_dir.
  nlohmann::ordered_json to_json() const;
  /// SHA-256 of to_json().
  std::string digest() const;

  LossWeights weights(std::size_t k) const;
};

std::string to_string(PredictorKind kind);

/// Machine-readable record of one command invocation.
struct RunLog {
  std::string command;
  bool ok = true;
  std::string error;
  std::string config_digest;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();     ///< name -> sha256
  nlohmann::ordered_json artifacts = nlohmann::ordered_json::object();  ///< relative path -> sha256
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
};

/// Writes `<out>/<command>.log.json`.
void write_run_log(const RunLog& log, const std::filesystem::path& out_dir);

struct GridResult {
  RunLog log;
  Grid source_grid;
  Grid target_grid;
};

struct DatasetResult {
  RunLog log;
  std::size_t samples = 0;
  std::size_t origins = 0;
};

struct TrainResult {
  RunLog log;
};

struct MatchResult {
  RunLog log;
  ODMatrix matrix;
  std::size_t origins = 0;
  std::vector<TripFailure> failures;
};

struct EvalResult {
  RunLog log;
  MetricReport report;
  std::optional<MetricReport> gravity_baseline;
};

struct SweepRow {
  double alpha = 0.0;
  MetricReport report;
};

struct SweepResult {
  RunLog log;
  std::vector<SweepRow> rows;
};

// Each command recomputes the stages it depends on from the configured
// inputs, writes its artifacts under config.output_dir and returns its log
// (not yet written to disk).

GridResult cmd_build_grid(const PipelineConfig& config);
DatasetResult cmd_build_dataset(const PipelineConfig& config);
TrainResult cmd_train(const PipelineConfig& config);
MatchResult cmd_predict_match(const PipelineConfig& config);
/// truth_path overrides config.target.truth.
EvalResult cmd_evaluate(const PipelineConfig& config, const std::optional<std::filesystem::path>& truth_path = {});
/// One row per alpha in config.alpha_sweep. Rows are computed with the full
/// combined loss (poi_only off), since alpha only weights the cost term.
SweepResult cmd_alpha_sweep(const PipelineConfig& config, const std::optional<std::filesystem::path>& truth_path = {});

}  // namespace odflow
