#include "odflow/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <set>

#include <fmt/format.h>

#include "odflow/dataset.hpp"
#include "odflow/digest.hpp"
#include "odflow/error.hpp"
#include "odflow/features.hpp"
#include "odflow/frequency.hpp"
#include "odflow/vocabulary.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace odflow {

namespace {

void allow_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (const auto& [key, _] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

template <class T>
T get(const json& obj, const char* key, std::string_view where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("{}.{} has the wrong type", where, key));
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

GeoBounds parse_bounds(const json& j, std::string_view where) {
  allow_keys(j, where, {"min_lat", "max_lat", "min_lon", "max_lon"});
  for (const char* key : {"min_lat", "max_lat", "min_lon", "max_lon"}) {
    if (!j.contains(key)) throw ConfigError(fmt::format("{} is missing {}", where, key));
  }
  return {get<double>(j, "min_lat", where, 0), get<double>(j, "max_lat", where, 0),
          get<double>(j, "min_lon", where, 0), get<double>(j, "max_lon", where, 0)};
}

CityConfig parse_city(const json& j, std::string_view where, const fs::path& base) {
  allow_keys(j, where, {"name", "bounds", "cell_size_m", "pois", "trips", "origins", "truth"});
  if (!j.contains("bounds")) throw ConfigError(fmt::format("{} is missing bounds", where));
  CityConfig c;
  c.name = get<std::string>(j, "name", where, std::string(where));
  c.bounds = parse_bounds(j.at("bounds"), fmt::format("{}.bounds", where));
  c.cell_size_m = get<double>(j, "cell_size_m", where, 0.0);
  c.pois = resolve(base, get<std::string>(j, "pois", where, ""));
  c.trips = resolve(base, get<std::string>(j, "trips", where, ""));
  c.origins = resolve(base, get<std::string>(j, "origins", where, ""));
  c.truth = resolve(base, get<std::string>(j, "truth", where, ""));
  return c;
}

PredictorKind parse_kind(const std::string& s) {
  if (s == "frequency") return PredictorKind::frequency;
  if (s == "gravity") return PredictorKind::gravity;
  if (s == "endpoint") return PredictorKind::endpoint;
  throw ConfigError(fmt::format("unknown predictor kind '{}'", s));
}

MassSource parse_mass(const std::string& s) {
  if (s == "poi_total") return MassSource::poi_total;
  if (s == "origin_counts") return MassSource::origin_counts;
  throw ConfigError(fmt::format("unknown gravity mass '{}'", s));
}

const char* mass_name(MassSource m) { return m == MassSource::poi_total ? "poi_total" : "origin_counts"; }

ordered_json city_json(const CityConfig& c) {
  return {{"name", c.name},
          {"bounds", {{"min_lat", c.bounds.min_lat}, {"max_lat", c.bounds.max_lat},
                      {"min_lon", c.bounds.min_lon}, {"max_lon", c.bounds.max_lon}}},
          {"cell_size_m", c.cell_size_m},
          {"pois", c.pois.string()},
          {"trips", c.trips.string()},
          {"origins", c.origins.string()},
          {"truth", c.truth.string()}};
}

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ConfigError(fmt::format("no {} file configured", what));
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw ConfigError(fmt::format("{} file not found: {}", what, p.string()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void record(RunLog& log, const fs::path& out_dir, const std::string& rel) {
  log.artifacts[rel] = sha256_file(out_dir / rel);
}

void record_input(RunLog& log, const std::string& name, const fs::path& p) {
  log.inputs[name] = sha256_file(p);
}

RunLog start_log(const PipelineConfig& cfg, std::string command) {
  RunLog log;
  log.command = std::move(command);
  log.config_digest = cfg.digest();
  return log;
}

// In-process stage state shared by the commands.

struct CityState {
  Grid grid;
  CityFeatures features;
  std::size_t pois_accepted = 0;
  std::size_t pois_out_of_bounds = 0;
  std::size_t pois_rejected = 0;
  std::size_t pois_malformed = 0;
};

Vocabulary load_vocab(const PipelineConfig& cfg, RunLog& log) {
  if (cfg.vocabulary.empty()) return Vocabulary::standard();
  require_file(cfg.vocabulary, "vocabulary");
  record_input(log, "vocabulary", cfg.vocabulary);
  return Vocabulary::load(cfg.vocabulary);
}

CityState load_city(const CityConfig& city, const Vocabulary& vocab, std::string_view role, RunLog& log) {
  require_file(city.pois, fmt::format("{} POI", role));
  record_input(log, fmt::format("{}_pois", role), city.pois);
  CityState s{Grid(city.bounds, city.cell_size_m), {}, 0, 0, 0, 0};
  const auto file = read_poi_csv(city.pois);
  auto assigned = assign_pois(s.grid, vocab, file.records);
  s.features = std::move(assigned.features);
  s.pois_accepted = assigned.accepted;
  s.pois_out_of_bounds = assigned.out_of_bounds;
  s.pois_rejected = assigned.rejected.size();
  s.pois_malformed = file.malformed.size();
  return s;
}

ordered_json city_summary(const CityState& s) {
  return {{"rows", s.grid.rows()},
          {"cols", s.grid.cols()},
          {"cells", s.grid.size()},
          {"grid_hash", grid_digest(s.grid)},
          {"pois_accepted", s.pois_accepted},
          {"pois_out_of_bounds", s.pois_out_of_bounds},
          {"pois_unknown_category", s.pois_rejected},
          {"pois_malformed", s.pois_malformed}};
}

struct SourceTrips {
  TripIngest ingest;
  std::vector<OdPoiSample> samples;
};

SourceTrips load_source_trips(const PipelineConfig& cfg, const CityState& source, RunLog& log) {
  require_file(cfg.source.trips, "source trip");
  record_input(log, "source_trips", cfg.source.trips);
  SourceTrips t{ingest_trips(cfg.source.trips, source.grid), {}};
  t.samples = build_od_poi_dataset(t.ingest.trips, source.features);
  return t;
}

OriginIngest load_target_origins(const PipelineConfig& cfg, const CityState& target, RunLog& log) {
  require_file(cfg.target.origins, "target origin");
  record_input(log, "target_origins", cfg.target.origins);
  return ingest_origins(cfg.target.origins, target.grid);
}

ODMatrix observed_matrix(const TripSet& trips, std::size_t n) {
  ODMatrix m(n);
  for (const auto& t : trips) m.add(t.origin, t.destination);
  return m;
}

struct Context {
  Vocabulary vocab;
  CityState source;
  CityState target;
};

Context load_context(const PipelineConfig& cfg, RunLog& log) {
  cfg.validate();
  auto vocab = load_vocab(cfg, log);
  auto source = load_city(cfg.source, vocab, "source", log);
  auto target = load_city(cfg.target, vocab, "target", log);
  return {std::move(vocab), std::move(source), std::move(target)};
}

double fitted_beta(const PipelineConfig& cfg, const CityState& source, const SourceTrips& trips) {
  if (!cfg.predictor.calibrate_beta) return cfg.predictor.gravity.beta;
  const auto observed = observed_matrix(trips.ingest.trips, source.grid.size());
  const auto origins = build_origin_set(trips.ingest.trips);
  const auto masses = gravity_masses(cfg.predictor.gravity.mass, source.features, origins);
  return calibrate_beta(masses, source.grid, observed, cfg.predictor.gravity.mass, cfg.predictor.beta_grid);
}

ODMatrix gravity_prediction(const PipelineConfig& cfg, const CityState& target, const OriginSet& origins,
                            double beta) {
  if (origins.empty()) return ODMatrix(target.grid.size());
  GravityParams params = cfg.predictor.gravity;
  params.beta = beta;
  const auto masses = gravity_masses(params.mass, target.features, origins);
  return gravity_od_matrix(masses, target.grid, params, origins.size());
}

// Predicts and matches the target origin set under cfg. Shared by match and
// sweep so a sweep row is exactly a single-alpha match run.
MatchResult run_match(const PipelineConfig& cfg, RunLog log) {
  auto ctx = load_context(cfg, log);
  const auto origins = load_target_origins(cfg, ctx.target, log);
  MatchResult res{std::move(log), ODMatrix(ctx.target.grid.size()), origins.origins.size(), {}};
  res.log.summary["origin_rows"] = origins.rows;
  res.log.summary["origins"] = origins.origins.size();
  res.log.summary["origins_out_of_bounds"] = origins.out_of_bounds;
  res.log.summary["origins_malformed"] = origins.malformed;

  std::unique_ptr<Predictor> predictor;
  switch (cfg.predictor.kind) {
    case PredictorKind::frequency: {
      const auto trips = load_source_trips(cfg, ctx.source, res.log);
      predictor = std::make_unique<FrequencyPredictor>(FrequencyTable::train(trips.samples));
      break;
    }
    case PredictorKind::gravity: {
      const auto trips = load_source_trips(cfg, ctx.source, res.log);
      const double beta = fitted_beta(cfg, ctx.source, trips);
      res.matrix = gravity_prediction(cfg, ctx.target, origins.origins, beta);
      res.log.summary["beta"] = beta;
      res.log.summary["matched"] = origins.origins.size();
      res.log.summary["failures"] = 0;
      res.log.summary["total_flow"] = res.matrix.total();
      return res;
    }
    case PredictorKind::endpoint:
      predictor = std::make_unique<EndpointPredictor>(cfg.predictor.endpoint, ctx.vocab, cfg.target.name);
      break;
  }

  const MatchPipeline pipe{ctx.target.grid, ctx.target.features, *predictor, cfg.weights(ctx.vocab.size()),
                           cfg.match,       cfg.error_budget,      cfg.threads};
  auto run = predict_od_matrix(pipe, origins.origins);
  res.matrix = std::move(run.matrix);
  res.failures = std::move(run.failures);
  res.log.summary["matched"] = run.processed;
  res.log.summary["failures"] = res.failures.size();
  res.log.summary["total_flow"] = res.matrix.total();
  ordered_json failures = ordered_json::array();
  for (const auto& f : res.failures) failures.push_back({{"index", f.index}, {"error", f.message}});
  res.log.summary["failed_entries"] = std::move(failures);
  return res;
}

ODMatrix load_truth(const PipelineConfig& cfg, const std::optional<fs::path>& truth_path, std::size_t n,
                    RunLog& log) {
  const fs::path path = truth_path ? *truth_path : cfg.target.truth;
  require_file(path, "ground-truth OD");
  record_input(log, "truth", path);
  return ODMatrix::read_csv(path, n);
}

std::string fmt_metric(double v) { return fmt::format("{:.10g}", v); }

}  // namespace

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::frequency: return "frequency";
    case PredictorKind::gravity: return "gravity";
    case PredictorKind::endpoint: return "endpoint";
  }
  return "unknown";
}

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  allow_keys(j, "config", {"vocabulary", "source", "target", "predictor", "loss", "match", "eval", "output_dir",
                           "seed", "threads"});
  PipelineConfig c;
  c.vocabulary = resolve(base_dir, get<std::string>(j, "vocabulary", "config", ""));
  if (!j.contains("source")) throw ConfigError("config is missing the source section");
  if (!j.contains("target")) throw ConfigError("config is missing the target section");
  c.source = parse_city(j.at("source"), "source", base_dir);
  c.target = parse_city(j.at("target"), "target", base_dir);

  if (j.contains("predictor")) {
    const auto& p = j.at("predictor");
    allow_keys(p, "predictor", {"kind", "endpoint", "gravity"});
    c.predictor.kind = parse_kind(get<std::string>(p, "kind", "predictor", "frequency"));
    if (p.contains("endpoint")) {
      const auto& e = p.at("endpoint");
      allow_keys(e, "predictor.endpoint", {"url", "timeout_ms", "max_in_flight", "retries"});
      auto& ep = c.predictor.endpoint;
      ep.base_url = get<std::string>(e, "url", "predictor.endpoint", ep.base_url);
      ep.timeout_ms = get<int>(e, "timeout_ms", "predictor.endpoint", ep.timeout_ms);
      ep.max_in_flight = get<std::size_t>(e, "max_in_flight", "predictor.endpoint", ep.max_in_flight);
      ep.retries = get<int>(e, "retries", "predictor.endpoint", ep.retries);
    }
    if (p.contains("gravity")) {
      const auto& g = p.at("gravity");
      allow_keys(g, "predictor.gravity", {"beta", "mass", "calibrate_beta", "beta_grid"});
      c.predictor.gravity.beta = get<double>(g, "beta", "predictor.gravity", c.predictor.gravity.beta);
      c.predictor.gravity.mass = parse_mass(get<std::string>(g, "mass", "predictor.gravity", "poi_total"));
      c.predictor.calibrate_beta = get<bool>(g, "calibrate_beta", "predictor.gravity", false);
      c.predictor.beta_grid = get<std::vector<double>>(g, "beta_grid", "predictor.gravity", c.predictor.beta_grid);
    }
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    allow_keys(l, "loss", {"weights", "alpha", "alpha_sweep"});
    c.loss_weights = get<std::vector<double>>(l, "weights", "loss", {});
    c.alpha = get<double>(l, "alpha", "loss", c.alpha);
    c.alpha_sweep = get<std::vector<double>>(l, "alpha_sweep", "loss", {});
  }
  if (j.contains("match")) {
    const auto& m = j.at("match");
    allow_keys(m, "match", {"cost_slack", "cost_tolerance_km", "poi_only", "error_budget"});
    c.match.cost_slack = get<double>(m, "cost_slack", "match", c.match.cost_slack);
    c.match.cost_tolerance_km = get<double>(m, "cost_tolerance_km", "match", c.match.cost_tolerance_km);
    c.match.poi_only = get<bool>(m, "poi_only", "match", c.match.poi_only);
    c.error_budget = get<std::size_t>(m, "error_budget", "match", 0);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    allow_keys(e, "eval", {"n_bins", "top_k_arcs"});
    c.n_bins = get<std::size_t>(e, "n_bins", "eval", c.n_bins);
    c.top_k_arcs = get<std::size_t>(e, "top_k_arcs", "eval", c.top_k_arcs);
  }
  c.output_dir = resolve(base_dir, get<std::string>(j, "output_dir", "config", "out"));
  c.seed = get<std::uint64_t>(j, "seed", "config", 0);
  c.threads = get<unsigned>(j, "threads", "config", 0);
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(j, fs::absolute(path).parent_path());
}

void PipelineConfig::apply_environment() {
  if (const char* url = std::getenv(kEndpointUrlEnv); url != nullptr && *url != '\0') {
    predictor.endpoint.base_url = url;
  }
}

void PipelineConfig::validate() const {
  for (const auto* city : {&source, &target}) {
    try {
      city->bounds.validate();
    } catch (const Error& e) {
      throw ConfigError(fmt::format("{} bounds: {}", city->name, e.what()));
    }
    if (!std::isfinite(city->cell_size_m) || city->cell_size_m <= 0.0) {
      throw ConfigError(fmt::format("{} cell_size_m must be > 0", city->name));
    }
  }
  if (source.cell_size_m != target.cell_size_m) {
    throw ConfigError(fmt::format("cell sizes differ between cities ({} m vs {} m)", source.cell_size_m,
                                  target.cell_size_m));
  }
  if (!std::isfinite(alpha) || alpha <= 0.0) throw ConfigError("loss.alpha must be > 0");
  for (double a : alpha_sweep) {
    if (!std::isfinite(a) || a <= 0.0) throw ConfigError("loss.alpha_sweep values must be > 0");
  }
  for (double w : loss_weights) {
    if (!std::isfinite(w) || w <= 0.0) throw ConfigError("loss.weights values must be > 0");
  }
  match.validate();
  if (n_bins == 0) throw ConfigError("eval.n_bins must be >= 1");
  if (!std::isfinite(predictor.gravity.beta) || predictor.gravity.beta < 0.0) {
    throw ConfigError("predictor.gravity.beta must be >= 0");
  }
  if (predictor.calibrate_beta && predictor.beta_grid.empty()) {
    throw ConfigError("predictor.gravity.beta_grid is empty");
  }
  if (predictor.kind == PredictorKind::endpoint) predictor.endpoint.validate();
}

ordered_json PipelineConfig::to_json() const {
  ordered_json j;
  j["vocabulary"] = vocabulary.string();
  j["source"] = city_json(source);
  j["target"] = city_json(target);
  j["predictor"] = {{"kind", to_string(predictor.kind)},
                    {"endpoint", {{"url", predictor.endpoint.base_url},
                                  {"timeout_ms", predictor.endpoint.timeout_ms},
                                  {"max_in_flight", predictor.endpoint.max_in_flight},
                                  {"retries", predictor.endpoint.retries}}},
                    {"gravity", {{"beta", predictor.gravity.beta},
                                 {"mass", mass_name(predictor.gravity.mass)},
                                 {"calibrate_beta", predictor.calibrate_beta},
                                 {"beta_grid", predictor.beta_grid}}}};
  j["loss"] = {{"weights", loss_weights}, {"alpha", alpha}, {"alpha_sweep", alpha_sweep}};
  j["match"] = {{"cost_slack", match.cost_slack},
                {"cost_tolerance_km", match.cost_tolerance_km},
                {"poi_only", match.poi_only},
                {"error_budget", error_budget}};
  j["eval"] = {{"n_bins", n_bins}, {"top_k_arcs", top_k_arcs}};
  j["seed"] = seed;
  return j;
}

std::string PipelineConfig::digest() const { return sha256_hex(to_json().dump()); }

LossWeights PipelineConfig::weights(std::size_t k) const {
  if (loss_weights.empty()) return LossWeights::unit(k, alpha);
  if (loss_weights.size() != k) {
    throw ConfigError(fmt::format("loss.weights has {} entries for {} categories", loss_weights.size(), k));
  }
  return {loss_weights, alpha};
}

ordered_json RunLog::to_json() const {
  ordered_json j;
  j["command"] = command;
  j["status"] = ok ? "ok" : "error";
  if (!ok) j["error"] = error;
  j["config_digest"] = config_digest;
  j["inputs"] = inputs;
  j["artifacts"] = artifacts;
  j["summary"] = summary;
  return j;
}

void write_run_log(const RunLog& log, const fs::path& out_dir) {
  write_text(out_dir / (log.command + ".log.json"), log.to_json().dump(2) + "\n");
}

GridResult cmd_build_grid(const PipelineConfig& cfg) {
  auto log = start_log(cfg, "grid");
  auto ctx = load_context(cfg, log);
  const auto& out = cfg.output_dir;
  for (const auto* city : {&ctx.source, &ctx.target}) {
    const std::string role = city == &ctx.source ? "source" : "target";
    const auto& cc = city == &ctx.source ? cfg.source : cfg.target;
    ensure_dir(out / role);
    write_features_csv(city->features, ctx.vocab, out / role / "features.csv");
    record(log, out, role + "/features.csv");
    ordered_json g = city_summary(*city);
    g["name"] = cc.name;
    g["cell_size_m"] = cc.cell_size_m;
    g["bounds"] = city_json(cc)["bounds"];
    g["features_digest"] = log.artifacts[role + "/features.csv"];
    write_text(out / role / "grid.json", g.dump(2) + "\n");
    record(log, out, role + "/grid.json");
    log.summary[role] = city_summary(*city);
  }
  return {std::move(log), ctx.source.grid, ctx.target.grid};
}

DatasetResult cmd_build_dataset(const PipelineConfig& cfg) {
  auto log = start_log(cfg, "dataset");
  auto ctx = load_context(cfg, log);
  const auto trips = load_source_trips(cfg, ctx.source, log);
  const auto origins = load_target_origins(cfg, ctx.target, log);
  const auto& out = cfg.output_dir;
  ensure_dir(out / "source");
  ensure_dir(out / "target");
  export_jsonl(trips.samples, cfg.source.name, ctx.vocab, out / "source" / "od_poi.jsonl");
  record(log, out, "source/od_poi.jsonl");
  write_origin_set(origins.origins, out / "target" / "origins.csv");
  record(log, out, "target/origins.csv");
  log.summary["trip_rows"] = trips.ingest.rows;
  log.summary["samples"] = trips.samples.size();
  log.summary["trips_malformed"] = trips.ingest.malformed;
  log.summary["trips_out_of_bounds"] = trips.ingest.out_of_bounds;
  log.summary["trips_missing_destination"] = trips.ingest.missing_destination;
  log.summary["origins"] = origins.origins.size();
  log.summary["origins_out_of_bounds"] = origins.out_of_bounds;
  return {std::move(log), trips.samples.size(), origins.origins.size()};
}

TrainResult cmd_train(const PipelineConfig& cfg) {
  auto log = start_log(cfg, "train");
  auto ctx = load_context(cfg, log);
  const auto& out = cfg.output_dir;
  log.summary["predictor"] = to_string(cfg.predictor.kind);
  switch (cfg.predictor.kind) {
    case PredictorKind::frequency: {
      const auto trips = load_source_trips(cfg, ctx.source, log);
      const auto table = FrequencyTable::train(trips.samples);
      ensure_dir(out / "model");
      table.save(out / "model" / "frequency_table.json");
      record(log, out, "model/frequency_table.json");
      log.summary["samples"] = trips.samples.size();
      log.summary["rows"] = table.rows().size();
      break;
    }
    case PredictorKind::gravity: {
      const auto trips = load_source_trips(cfg, ctx.source, log);
      const double beta = fitted_beta(cfg, ctx.source, trips);
      ordered_json g = {{"beta", beta},
                        {"mass", mass_name(cfg.predictor.gravity.mass)},
                        {"calibrated", cfg.predictor.calibrate_beta}};
      write_text(out / "model" / "gravity.json", g.dump(2) + "\n");
      record(log, out, "model/gravity.json");
      log.summary["beta"] = beta;
      break;
    }
    case PredictorKind::endpoint: {
      // The model is tuned and served outside this tool; record what the
      // match stage will talk to.
      ordered_json e = {{"url", cfg.predictor.endpoint.base_url},
                        {"city", cfg.target.name},
                        {"instruction", render_instruction_text(cfg.target.name, ctx.vocab)}};
      write_text(out / "model" / "endpoint.json", e.dump(2) + "\n");
      record(log, out, "model/endpoint.json");
      break;
    }
  }
  return {std::move(log)};
}

MatchResult cmd_predict_match(const PipelineConfig& cfg) {
  auto res = run_match(cfg, start_log(cfg, "match"));
  const auto& out = cfg.output_dir;
  ensure_dir(out / "target");
  const Grid grid(cfg.target.bounds, cfg.target.cell_size_m);
  res.matrix.write_csv(out / "target" / "od_pred.csv");
  record(res.log, out, "target/od_pred.csv");
  write_od_sidecar(out / "target" / "od_pred.json", res.matrix, grid, res.log.config_digest);
  record(res.log, out, "target/od_pred.json");
  return res;
}

EvalResult cmd_evaluate(const PipelineConfig& cfg, const std::optional<fs::path>& truth_path) {
  auto log = start_log(cfg, "eval");
  cfg.validate();
  const auto& out = cfg.output_dir;
  const Grid grid(cfg.target.bounds, cfg.target.cell_size_m);
  const auto pred_path = out / "target" / "od_pred.csv";
  const auto sidecar_path = out / "target" / "od_pred.json";
  if (!fs::is_regular_file(pred_path) || !fs::is_regular_file(sidecar_path)) {
    throw ConfigError(fmt::format("no predicted matrix under {}; run match first", out.string()));
  }
  {
    std::ifstream in(sidecar_path, std::ios::binary);
    const auto side = json::parse(in, nullptr, false);
    if (side.is_discarded() || !side.is_object()) throw IoError("unreadable " + sidecar_path.string());
    if (side.value("grid_hash", "") != grid_digest(grid)) {
      throw DimensionMismatch("predicted matrix was built on a different target grid");
    }
    if (side.value("config_digest", "") != log.config_digest) {
      throw ConfigError("predicted matrix is stale for this configuration; re-run match");
    }
  }
  record_input(log, "prediction", pred_path);
  const auto pred = ODMatrix::read_csv(pred_path, grid.size());
  const auto truth = load_truth(cfg, truth_path, grid.size(), log);

  EvalResult res{std::move(log), evaluate(truth, pred), std::nullopt};
  ordered_json metrics = res.report.to_json();

  if (cfg.predictor.kind != PredictorKind::gravity && !cfg.source.trips.empty() && !cfg.target.origins.empty()) {
    RunLog scratch;
    auto ctx = load_context(cfg, scratch);
    const auto trips = load_source_trips(cfg, ctx.source, scratch);
    const auto origins = load_target_origins(cfg, ctx.target, scratch);
    const auto baseline = gravity_prediction(cfg, ctx.target, origins.origins, fitted_beta(cfg, ctx.source, trips));
    if (truth.total() > 0 || baseline.total() > 0) {
      res.gravity_baseline = evaluate(truth, baseline);
      metrics["gravity_baseline"] = res.gravity_baseline->to_json();
    }
  }

  ensure_dir(out / "eval");
  write_text(out / "eval" / "metrics.json", metrics.dump(2) + "\n");
  record(res.log, out, "eval/metrics.json");
  write_binned_csv(binned_errors(truth, pred, grid, BinMode::flow, cfg.n_bins), out / "eval" / "binned_flow.csv");
  record(res.log, out, "eval/binned_flow.csv");
  write_binned_csv(binned_errors(truth, pred, grid, BinMode::distance, cfg.n_bins),
                   out / "eval" / "binned_distance.csv");
  record(res.log, out, "eval/binned_distance.csv");
  export_arcs(pred, grid, cfg.top_k_arcs, out / "eval" / "arcs_predicted.json");
  record(res.log, out, "eval/arcs_predicted.json");
  export_arcs(truth, grid, cfg.top_k_arcs, out / "eval" / "arcs_truth.json");
  record(res.log, out, "eval/arcs_truth.json");
  res.log.summary = metrics;
  return res;
}

SweepResult cmd_alpha_sweep(const PipelineConfig& cfg, const std::optional<fs::path>& truth_path) {
  auto log = start_log(cfg, "sweep");
  if (cfg.alpha_sweep.empty()) throw ConfigError("loss.alpha_sweep is empty");
  if (cfg.predictor.kind == PredictorKind::gravity) {
    throw ConfigError("alpha sweep needs a per-trip predictor; the gravity baseline ignores alpha");
  }
  cfg.validate();
  const Grid grid(cfg.target.bounds, cfg.target.cell_size_m);
  const auto truth = load_truth(cfg, truth_path, grid.size(), log);

  SweepResult res{std::move(log), {}};
  std::string csv = "alpha,rmse,smape,cpc\n";
  ordered_json rows = ordered_json::array();
  for (double a : cfg.alpha_sweep) {
    PipelineConfig single = cfg;
    single.alpha = a;
    single.match.poi_only = false;
    auto run = run_match(single, RunLog{});
    for (auto& [k, v] : run.log.inputs.items()) res.log.inputs[k] = v;
    SweepRow row{a, evaluate(truth, run.matrix)};
    csv += fmt::format("{},{},{},{}\n", fmt_metric(a), fmt_metric(row.report.rmse), fmt_metric(row.report.smape),
                       fmt_metric(row.report.cpc));
    rows.push_back({{"alpha", a}, {"metrics", row.report.to_json()}, {"failures", run.failures.size()}});
    res.rows.push_back(row);
  }
  write_text(cfg.output_dir / "sweep.csv", csv);
  record(res.log, cfg.output_dir, "sweep.csv");
  res.log.summary["poi_only"] = false;
  res.log.summary["rows"] = std::move(rows);
  return res;
}

}  // namespace odflow
