#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>

#include "odflow/error.hpp"
#include "odflow/frequency.hpp"
#include "test_util.hpp"

using namespace odflow;

namespace {

constexpr std::size_t K = 5;

SpatialFeature feat(std::initializer_list<std::uint32_t> c) { return {std::vector<std::uint32_t>(c)}; }
std::vector<std::uint32_t> counts(std::initializer_list<std::uint32_t> c) { return c; }
Timestamp at(int h, int m = 0) { return Timestamp::from_civil(2023, 6, 1, h, m); }

std::vector<OdPoiSample> random_samples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> small(0, 2), big(0, 9);
  std::uniform_int_distribution<int> hour(0, 5), minute(0, 59);
  std::uniform_real_distribution<double> cost(0, 20);
  std::vector<OdPoiSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    SpatialFeature o{std::vector<std::uint32_t>(K)}, d{std::vector<std::uint32_t>(K)};
    for (auto& c : o.counts) c = small(rng) == 0 ? 1 : 0;
    for (auto& c : d.counts) c = big(rng);
    out.push_back({o, at(hour(rng), minute(rng)), d, cost(rng)});
  }
  return out;
}

}  // namespace

TEST_CASE("signature is the set of present categories") {
  CHECK(signature_of(std::vector<std::uint32_t>{0, 3, 0, 1}) == OriginSignature{1, 3});
  CHECK(signature_of(std::vector<std::uint32_t>{0, 0}).empty());
}

TEST_CASE("a single sample is its own row") {
  const std::vector<OdPoiSample> s{{feat({1, 0, 2, 0, 0}), at(9, 30), feat({0, 4, 0, 1, 0}), 2.75}};
  const auto t = train_frequency(s);
  REQUIRE(t.rows().size() == 1);
  const auto& [key, row] = *t.rows().begin();
  CHECK(key.first == OriginSignature{0, 2});
  CHECK(key.second == 9);
  CHECK(row.count == 1);
  CHECK(row.mean_destination == std::vector<double>{0, 4, 0, 1, 0});
  CHECK(row.mean_cost_km == 2.75);
  const auto p = t.predict(counts({5, 0, 1, 0, 0}), at(9, 59));
  CHECK(p == Prediction{{0, 4, 0, 1, 0}, 2.75});
}

TEST_CASE("rows average samples sharing a key") {
  const std::vector<OdPoiSample> s{{feat({1, 0, 0, 0, 0}), at(8), feat({2, 0, 0, 0, 0}), 1.0},
                                   {feat({3, 0, 0, 0, 0}), at(8, 40), feat({0, 2, 0, 0, 0}), 3.0}};
  const auto t = train_frequency(s);
  REQUIRE(t.rows().size() == 1);
  const auto& row = t.rows().begin()->second;
  CHECK(row.mean_cost_km == 2.0);
  CHECK(row.mean_destination == std::vector<double>{1, 1, 0, 0, 0});
}

TEST_CASE("row means match a brute-force recomputation") {
  const auto samples = random_samples(500, 21);
  const auto t = train_frequency(samples);
  std::map<std::pair<OriginSignature, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    groups[{signature_of(samples[i].origin.counts), samples[i].start_time.hour()}].push_back(i);
  }
  REQUIRE(groups.size() == t.rows().size());
  for (const auto& [key, members] : groups) {
    const auto& row = t.rows().at(key);
    CHECK(row.count == members.size());
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0;
      for (auto i : members) s += samples[i].destination.counts[k];
      CHECK(std::abs(row.mean_destination[k] - s / members.size()) <= 1e-9);
    }
    double c = 0;
    for (auto i : members) c += samples[i].cost_km;
    CHECK(std::abs(row.mean_cost_km - c / members.size()) <= 1e-9);
  }
  double c = 0;
  for (const auto& s : samples) c += s.cost_km;
  CHECK(std::abs(t.global().mean_cost_km - c / samples.size()) <= 1e-9);
  CHECK(t.global().count == 500);
}

TEST_CASE("memorization and fallback tiers") {
  const std::vector<OdPoiSample> s{{feat({1, 0, 0, 0, 0}), at(8), feat({4, 0, 0, 0, 0}), 1.0},
                                   {feat({0, 1, 0, 0, 0}), at(8), feat({0, 2, 0, 0, 0}), 3.0},
                                   {feat({0, 0, 1, 0, 0}), at(17), feat({0, 0, 6, 0, 0}), 8.0}};
  const auto t = train_frequency(s);
  // Seen once: returns the training sample.
  CHECK(t.predict(counts({0, 0, 2, 0, 0}), at(17, 10)) == Prediction{{0, 0, 6, 0, 0}, 8.0});
  // Unseen signature at a trained hour: that hour's mean.
  CHECK(t.predict(counts({0, 0, 0, 1, 0}), at(8, 30)) == Prediction{{2, 1, 0, 0, 0}, 2.0});
  // Known signature at an unseen hour, and unseen signature at an unseen hour: global mean.
  const Prediction global{{4.0 / 3, 2.0 / 3, 2.0, 0, 0}, 4.0};
  CHECK(t.predict(counts({1, 0, 0, 0, 0}), at(3)) == global);
  CHECK(t.predict(counts({0, 0, 0, 0, 1}), at(23)) == global);
  CHECK(t.predict(counts({0, 0, 0, 0, 0}), at(23)) == global);
  CHECK_THROWS_AS(t.predict(std::vector<std::uint32_t>{1, 0}, at(8)), DimensionMismatch);
}

TEST_CASE("training input validation") {
  CHECK_THROWS_AS(train_frequency({}), EmptyDataset);
  const std::vector<OdPoiSample> ragged{{feat({1, 0}), at(1), feat({1, 0}), 1.0},
                                        {feat({1, 0, 0}), at(1), feat({1, 0, 0}), 1.0}};
  CHECK_THROWS_AS(train_frequency(ragged), DimensionMismatch);
}

TEST_CASE("persisted tables reproduce predictions") {
  testutil::TempDir dir("freq");
  const auto samples = random_samples(300, 4);
  const auto t = train_frequency(samples);
  t.save(dir / "t.json");
  const auto back = FrequencyTable::load(dir / "t.json");
  CHECK(back == t);
  for (const auto& s : samples) {
    CHECK(back.predict(s.origin.counts, s.start_time) == t.predict(s.origin.counts, s.start_time));
  }
  CHECK(back.predict(counts({0, 0, 0, 0, 0}), at(20)) == t.predict(counts({0, 0, 0, 0, 0}), at(20)));

  // Training is a pure function of the samples.
  t.save(dir / "t2.json");
  train_frequency(samples).save(dir / "t3.json");
  CHECK(testutil::read_file(dir / "t2.json") == testutil::read_file(dir / "t3.json"));

  auto j = t.to_json();
  j["version"] = 99;
  CHECK_THROWS_AS(FrequencyTable::from_json(j), ConfigError);
  j = t.to_json();
  j["format"] = "something else";
  CHECK_THROWS_AS(FrequencyTable::from_json(j), ConfigError);
  testutil::write_file(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(FrequencyTable::load(dir / "bad.json"), ConfigError);
}

TEST_CASE("frequency predictor answers every query") {
  const auto samples = random_samples(50, 8);
  const FrequencyPredictor p(train_frequency(samples));
  std::vector<PredictQuery> q;
  for (const auto& s : samples) q.push_back({s.origin.counts, s.start_time});
  const std::vector<std::uint32_t> wrong{1};
  q.push_back({wrong, at(1)});
  const auto out = p.predict_all(q);
  REQUIRE(out.size() == q.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    REQUIRE(out[i].ok());
    CHECK(*out[i].prediction == p.predict(samples[i].origin.counts, samples[i].start_time));
  }
  CHECK_FALSE(out.back().ok());
  CHECK(out.back().failure == PredictFailure::other);
}
