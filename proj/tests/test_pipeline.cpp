#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "odflow/dataset.hpp"
#include "odflow/digest.hpp"
#include "odflow/error.hpp"
#include "odflow/eval.hpp"
#include "odflow/features.hpp"
#include "odflow/frequency.hpp"
#include "odflow/vocabulary.hpp"
#include "scenario_runner.hpp"
#include "test_util.hpp"

using namespace odflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ScenarioSpec small_spec(std::uint64_t seed = 5) {
  ScenarioSpec s;
  s.rows = 4;
  s.cols = 5;
  s.k = 5;
  s.extra_source_trips = 100;
  s.target_trips = 200;
  s.seed = seed;
  return s;
}

PipelineConfig fresh(const testutil::TempDir& dir, std::uint64_t seed = 5) {
  write_scenario(generate_scenario(small_spec(seed)), dir.path());
  return PipelineConfig::load(dir / "config.json");
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = testutil::read_file(e.path());
  }
  return out;
}

json read_json(const fs::path& p) { return json::parse(testutil::read_file(p)); }

std::string minimal_config() {
  return R"({
    "source": {"name": "a", "bounds": {"min_lat": 0, "max_lat": 0.02, "min_lon": 0, "max_lon": 0.02},
               "cell_size_m": 1000, "pois": "a.csv", "trips": "t.csv"},
    "target": {"name": "b", "bounds": {"min_lat": 1, "max_lat": 1.02, "min_lon": 1, "max_lon": 1.02},
               "cell_size_m": 1000, "pois": "b.csv", "origins": "o.csv"}
  })";
}

struct Cli {
  int code;
  std::string out;
  std::string err;
};

Cli run_cli(const testutil::TempDir& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir / "cli_stdout.txt";
  const auto err = dir / "cli_stderr.txt";
  const auto cmd = fmt::format("{} '{}' {} > '{}' 2> '{}'", env, ODFLOW_CLI_PATH, args, out.string(), err.string());
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::read_file(out), testutil::read_file(err)};
}

}  // namespace

TEST_CASE("config parsing") {
  testutil::TempDir dir("cfg");
  testutil::write_file(dir / "c.json", minimal_config());
  const auto cfg = PipelineConfig::load(dir / "c.json");
  CHECK(cfg.source.pois == dir.path() / "a.csv");
  CHECK(cfg.target.origins == dir.path() / "o.csv");
  CHECK(cfg.output_dir == dir.path() / "out");
  CHECK(cfg.predictor.kind == PredictorKind::frequency);
  CHECK(cfg.alpha == 1.0);
  CHECK(cfg.match.poi_only);
  CHECK_NOTHROW(cfg.validate());

  auto with = [&](const std::string& patch) {
    auto j = json::parse(minimal_config());
    j.merge_patch(json::parse(patch));
    return PipelineConfig::from_json(j, dir.path());
  };
  CHECK_THROWS_AS(with(R"({"colour": 1})"), ConfigError);
  CHECK_THROWS_AS(with(R"({"source": {"cell_size": 1}})"), ConfigError);
  CHECK_THROWS_AS(with(R"({"predictor": {"kind": "oracle"}})"), ConfigError);
  CHECK_THROWS_AS(with(R"({"loss": {"alpha": "high"}})"), ConfigError);
  CHECK_THROWS_AS(with(R"({"source": {"cell_size_m": 500}})").validate(), ConfigError);
  CHECK_THROWS_AS(with(R"({"loss": {"alpha": 0}})").validate(), ConfigError);
  CHECK_THROWS_AS(with(R"({"loss": {"alpha_sweep": [1, -2]}})").validate(), ConfigError);
  CHECK_THROWS_AS(with(R"({"match": {"cost_slack": -1}})").validate(), ConfigError);
  CHECK_THROWS_AS(with(R"({"eval": {"n_bins": 0}})").validate(), ConfigError);
  CHECK_THROWS_AS(with(R"({"target": {"bounds": {"max_lat": 0.5}}})").validate(), ConfigError);
  CHECK(with(R"({"match": {"poi_only": false, "error_budget": 4}})").error_budget == 4);

  testutil::write_file(dir / "broken.json", "{ \"source\": ");
  CHECK_THROWS_AS(PipelineConfig::load(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::load(dir / "none.json"), ConfigError);

  // The digest follows every field except the output directory.
  auto base = with("{}");
  auto moved = base;
  moved.output_dir = "/elsewhere";
  CHECK(base.digest() == moved.digest());
  auto tweaked = base;
  tweaked.match.cost_slack = 0.1;
  CHECK(base.digest() != tweaked.digest());
}

TEST_CASE("environment overrides the endpoint url") {
  testutil::TempDir dir("env");
  testutil::write_file(dir / "c.json", minimal_config());
  auto cfg = PipelineConfig::load(dir / "c.json");
  ::setenv(kEndpointUrlEnv, "http://10.1.2.3:9000/v1", 1);
  cfg.apply_environment();
  ::unsetenv(kEndpointUrlEnv);
  CHECK(cfg.predictor.endpoint.base_url == "http://10.1.2.3:9000/v1");
}

TEST_CASE("grid stage") {
  testutil::TempDir dir("grid");
  auto cfg = fresh(dir);
  const auto first = cmd_build_grid(cfg);
  const auto out = cfg.output_dir;
  const auto before = tree(out);
  CHECK(before.count("source/features.csv") == 1);
  CHECK(before.count("target/grid.json") == 1);
  CHECK(first.source_grid.size() == 20);

  SUBCASE("re-running is byte-identical") {
    cmd_build_grid(cfg);
    CHECK(tree(out) == before);
  }
  SUBCASE("input digests follow file contents") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(first.log.inputs["source_pois"] == sha256_file(cfg.source.pois));
    CHECK(first.log.artifacts["source/features.csv"] == sha256_hex(before.at("source/features.csv")));

    // A POI of an unknown category changes the input but not the features.
    std::string pois = testutil::read_file(cfg.source.pois);
    testutil::write_file(cfg.source.pois, pois + "0.0,116.4,not_a_category\n");
    const auto unknown = cmd_build_grid(cfg);
    CHECK(unknown.log.inputs["source_pois"] != first.log.inputs["source_pois"]);
    CHECK(unknown.log.artifacts["source/features.csv"] == first.log.artifacts["source/features.csv"]);

    // A counted POI changes both; the untouched target keeps its digests.
    const auto c = first.source_grid.cell_center(CellId{0});
    const auto cat = Vocabulary::load(cfg.vocabulary).name(0);
    testutil::write_file(cfg.source.pois, pois + fmt::format("{},{},{}\n", c.lat, c.lon, cat));
    const auto counted = cmd_build_grid(cfg);
    CHECK(counted.log.artifacts["source/features.csv"] != first.log.artifacts["source/features.csv"]);
    CHECK(counted.log.artifacts["target/features.csv"] == first.log.artifacts["target/features.csv"]);
    CHECK(counted.log.inputs["target_pois"] == first.log.inputs["target_pois"]);

    testutil::write_file(cfg.source.pois, pois);
    CHECK(cmd_build_grid(cfg).log.artifacts == first.log.artifacts);
  }
  SUBCASE("a missing POI file is named") {
    fs::remove(cfg.target.pois);
    try {
      cmd_build_grid(cfg);
      FAIL("expected an error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("target POI file not found") != std::string::npos);
      CHECK(std::string(e.what()).find(cfg.target.pois.string()) != std::string::npos);
    }
  }
}

TEST_CASE("dataset stage") {
  testutil::TempDir dir("dataset");
  const auto sc = generate_scenario(small_spec());
  write_scenario(sc, dir.path());
  auto cfg = PipelineConfig::load(dir / "config.json");
  const auto res = cmd_build_dataset(cfg);
  CHECK(res.samples == sc.source.trips.size());
  CHECK(res.origins == sc.target.trips.size());

  const auto lines = read_jsonl(cfg.output_dir / "source" / "od_poi.jsonl");
  REQUIRE(lines.size() == sc.source.trips.size());

  // Independent module-level recomputation of selected lines.
  const auto vocab = Vocabulary::load(cfg.vocabulary);
  const Grid g(cfg.source.bounds, cfg.source.cell_size_m);
  const auto feats = assign_pois(g, vocab, read_poi_csv(cfg.source.pois).records).features;
  const auto samples = build_od_poi_dataset(ingest_trips(cfg.source.trips, g).trips, feats);
  for (std::size_t i : {std::size_t{0}, lines.size() / 2, lines.size() - 1}) {
    CHECK(lines[i] == render_instruction(samples[i], cfg.source.name, vocab));
  }
  CHECK(read_origin_set(cfg.output_dir / "target" / "origins.csv").size() == res.origins);

  const auto before = tree(cfg.output_dir);
  cmd_build_dataset(cfg);
  CHECK(tree(cfg.output_dir) == before);

  testutil::write_file(cfg.source.trips, "o_lat,o_lon,d_lat,d_lon,start_time\n");
  CHECK_THROWS_AS(cmd_build_dataset(cfg), EmptyDataset);
  CHECK_THROWS_AS(cmd_train(cfg), EmptyDataset);
}

TEST_CASE("train stage") {
  testutil::TempDir dir("train");
  auto cfg = fresh(dir);
  cmd_train(cfg);
  const auto path = cfg.output_dir / "model" / "frequency_table.json";
  const auto bytes = testutil::read_file(path);
  cmd_train(cfg);
  CHECK(testutil::read_file(path) == bytes);

  const auto vocab = Vocabulary::load(cfg.vocabulary);
  const Grid g(cfg.source.bounds, cfg.source.cell_size_m);
  const auto feats = assign_pois(g, vocab, read_poi_csv(cfg.source.pois).records).features;
  const auto samples = build_od_poi_dataset(ingest_trips(cfg.source.trips, g).trips, feats);
  const auto trained = FrequencyTable::train(samples);
  const auto reloaded = FrequencyTable::load(path);
  CHECK(reloaded == trained);
  const FrequencyPredictor a(trained), b(reloaded);
  for (std::size_t i = 0; i < samples.size(); i += 7) {
    const auto counts = samples[i].origin.counts;
    const auto pa = a.predict(counts, samples[i].start_time);
    const auto pb = b.predict(counts, samples[i].start_time);
    CHECK(pa.u_hat == pb.u_hat);
    CHECK(pa.c_hat_km == pb.c_hat_km);
  }

  cfg.predictor.kind = PredictorKind::gravity;
  cmd_train(cfg);
  CHECK(read_json(cfg.output_dir / "model" / "gravity.json")["beta"] == 2.0);
}

TEST_CASE("match stage") {
  testutil::TempDir dir("match");
  const auto sc = generate_scenario(small_spec());
  write_scenario(sc, dir.path());
  auto cfg = PipelineConfig::load(dir / "config.json");

  SUBCASE("conservation for every predictor") {
    for (auto kind : {PredictorKind::frequency, PredictorKind::gravity}) {
      cfg.predictor.kind = kind;
      const auto res = cmd_predict_match(cfg);
      CHECK(res.matrix.total() == sc.target.trips.size());
      CHECK(ODMatrix::read_csv(cfg.output_dir / "target" / "od_pred.csv", res.matrix.n()) == res.matrix);
      const auto side = read_json(cfg.output_dir / "target" / "od_pred.json");
      CHECK(side["config_digest"] == cfg.digest());
    }
  }
  SUBCASE("zero origins give a zero matrix") {
    testutil::write_file(cfg.target.origins, "o_lat,o_lon,d_lat,d_lon,start_time\n");
    const auto res = cmd_predict_match(cfg);
    CHECK(res.matrix.total() == 0);
    CHECK(res.matrix.n() == 20);
    CHECK(testutil::read_file(cfg.output_dir / "target" / "od_pred.csv") == "origin_cell,dest_cell,flow\n");
  }
  SUBCASE("equals a direct module-level run") {
    const auto vocab = Vocabulary::load(cfg.vocabulary);
    const Grid sg(cfg.source.bounds, cfg.source.cell_size_m), tg(cfg.target.bounds, cfg.target.cell_size_m);
    const auto sf = assign_pois(sg, vocab, read_poi_csv(cfg.source.pois).records).features;
    const auto tf = assign_pois(tg, vocab, read_poi_csv(cfg.target.pois).records).features;
    const FrequencyPredictor p(FrequencyTable::train(build_od_poi_dataset(ingest_trips(cfg.source.trips, sg).trips, sf)));
    const auto origins = ingest_origins(cfg.target.origins, tg).origins;
    const auto direct = predict_od_matrix({tg, tf, p, cfg.weights(vocab.size()), cfg.match, 0, 1}, origins);
    CHECK(cmd_predict_match(cfg).matrix == direct.matrix);
  }
}

TEST_CASE("eval stage") {
  testutil::TempDir dir("eval");
  const auto sc = generate_scenario(small_spec());
  const auto run = runner::run_all(sc, dir.path());
  const auto& cfg = run.config;
  const auto out = cfg.output_dir;

  // Report equals module-level metric calls on the same files.
  const auto pred = ODMatrix::read_csv(out / "target" / "od_pred.csv", 20);
  const auto truth = ODMatrix::read_csv(cfg.target.truth, 20);
  const auto direct = evaluate(truth, pred);
  CHECK(run.eval.report.rmse == direct.rmse);
  CHECK(run.eval.report.smape == direct.smape);
  CHECK(run.eval.report.cpc == direct.cpc);
  const auto metrics = read_json(out / "eval" / "metrics.json");
  CHECK(metrics["cpc"].get<double>() == direct.cpc);
  CHECK(metrics.contains("gravity_baseline"));
  for (const char* f : {"binned_flow.csv", "binned_distance.csv", "arcs_predicted.json", "arcs_truth.json"}) {
    CHECK(fs::is_regular_file(out / "eval" / f));
  }

  // Truth equal to the prediction.
  const auto same = cmd_evaluate(cfg, out / "target" / "od_pred.csv");
  CHECK(same.report.rmse == 0.0);
  CHECK(same.report.cpc == 1.0);

  // A truth file for a bigger matrix.
  testutil::write_file(dir / "big.csv", "origin_cell,dest_cell,flow\n0,25,1\n");
  CHECK_THROWS_AS(cmd_evaluate(cfg, dir / "big.csv"), DimensionMismatch);

  // A config change after matching makes the prediction stale.
  auto changed = cfg;
  changed.alpha = 3;
  CHECK_THROWS_AS(cmd_evaluate(changed), ConfigError);
  auto regrid = cfg;
  regrid.target.bounds.max_lat += 0.01;
  CHECK_THROWS_AS(cmd_evaluate(regrid), DimensionMismatch);
}

TEST_CASE("alpha sweep") {
  testutil::TempDir dir("sweep");
  auto cfg = fresh(dir, 9);
  cfg.alpha_sweep = {0.5, 1.0, 4.0};
  const auto sweep = cmd_alpha_sweep(cfg);
  REQUIRE(sweep.rows.size() == 3);
  const auto csv = testutil::read_file(cfg.output_dir / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("alpha,rmse,smape,cpc\n", 0) == 0);

  for (const auto& row : sweep.rows) {
    auto single = cfg;
    single.alpha = row.alpha;
    single.match.poi_only = false;
    single.alpha_sweep.clear();
    single.output_dir = dir / fmt::format("single_{}", row.alpha);
    cmd_predict_match(single);
    const auto ev = cmd_evaluate(single);
    CHECK(ev.report.rmse == row.report.rmse);
    CHECK(ev.report.smape == row.report.smape);
    CHECK(ev.report.cpc == row.report.cpc);
  }

  auto empty = cfg;
  empty.alpha_sweep.clear();
  CHECK_THROWS_AS(cmd_alpha_sweep(empty), ConfigError);
  auto gravity = cfg;
  gravity.predictor.kind = PredictorKind::gravity;
  CHECK_THROWS_AS(cmd_alpha_sweep(gravity), ConfigError);
}

TEST_CASE("command line") {
  testutil::TempDir dir("cli");
  const auto scen = dir / "scenario";
  auto r = run_cli(dir, fmt::format("synth -o '{}' --rows 4 --cols 5 --k 5 --target-trips 150 --seed 4", scen.string()));
  REQUIRE(r.code == 0);
  const auto config = (scen / "config.json").string();
  const auto out = dir / "run";

  for (const char* cmd : {"grid", "dataset", "train", "match", "eval", "sweep"}) {
    r = run_cli(dir, fmt::format("{} -c '{}' -o '{}'", cmd, config, out.string()));
    CAPTURE(cmd);
    CAPTURE(r.err);
    CHECK(r.code == 0);
    CHECK_NOTHROW(json::parse(r.out));
    const auto log = read_json(out / fmt::format("{}.log.json", cmd));
    CHECK(log["status"] == "ok");
    CHECK(log["command"] == cmd);
  }
  CHECK(read_json(out / "eval.log.json")["summary"]["cpc"].get<double>() > 0.0);

  // Errors still leave a run log.
  r = run_cli(dir, fmt::format("eval -c '{}' -o '{}' --truth '{}'", config, out.string(), (dir / "nope.csv").string()));
  CHECK(r.code == 1);
  CHECK(r.err.find("ground-truth OD file not found") != std::string::npos);
  CHECK(read_json(out / "eval.log.json")["status"] == "error");

  // Overrides change the digest, so eval sees a stale prediction.
  r = run_cli(dir, fmt::format("eval -c '{}' -o '{}' --alpha 2", config, out.string()));
  CHECK(r.code == 1);

  // An unreachable endpoint with no error budget exits with the budget code.
  auto j = read_json(scen / "config.json");
  j["predictor"]["kind"] = "endpoint";
  j["predictor"]["endpoint"] = {{"url", "http://192.0.2.1:9"}, {"retries", 0}, {"timeout_ms", 200}};
  testutil::write_file(scen / "endpoint.json", j.dump());
  r = run_cli(dir, fmt::format("match -c '{}' -o '{}'", (scen / "endpoint.json").string(), (dir / "ep").string()),
              "ODFLOW_ENDPOINT_URL=http://127.0.0.1:1");
  CHECK(r.code == 3);
  const auto log = read_json(dir / "ep" / "match.log.json");
  CHECK(log["status"] == "error");
  CHECK(log["error"].get<std::string>().find("127.0.0.1:1") != std::string::npos);

  r = run_cli(dir, "bogus");
  CHECK(r.code != 0);
  r = run_cli(dir, fmt::format("grid -c '{}'", (dir / "missing.json").string()));
  CHECK(r.code != 0);
}
