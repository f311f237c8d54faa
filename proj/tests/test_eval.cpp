#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "odflow/error.hpp"
#include "odflow/eval.hpp"
#include "test_util.hpp"

using namespace odflow;

namespace {

using Dense = std::vector<std::vector<std::uint64_t>>;

ODMatrix from_dense(const Dense& d) {
  ODMatrix m(d.size());
  for (std::uint32_t i = 0; i < d.size(); ++i) {
    for (std::uint32_t j = 0; j < d.size(); ++j) {
      if (d[i][j]) m.add(CellId{i}, CellId{j}, d[i][j]);
    }
  }
  return m;
}

Dense random_dense(std::mt19937_64& rng, std::size_t n, double density, std::uint64_t max_flow) {
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<std::uint64_t> flow(1, max_flow);
  Dense d(n, std::vector<std::uint64_t>(n, 0));
  for (auto& row : d) {
    for (auto& x : row) {
      if (u(rng) < density) x = flow(rng);
    }
  }
  return d;
}

// Two-pass dense references.
double naive_rmse(const Dense& a, const Dense& b) {
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) diff.push_back(double(a[i][j]) - double(b[i][j]));
  }
  double s = 0;
  for (double d : diff) s += d * d;
  return std::sqrt(s / double(diff.size()));
}

double naive_smape(const Dense& a, const Dense& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double x = double(a[i][j]), y = double(b[i][j]);
      s += (x == 0 && y == 0) ? 0.0 : std::abs(x - y) / ((x + y) / 2);
    }
  }
  return s / double(a.size() * a.size());
}

double naive_cpc(const Dense& a, const Dense& b) {
  double common = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      common += double(std::min(a[i][j], b[i][j]));
      sa += double(a[i][j]);
      sb += double(b[i][j]);
    }
  }
  return 2 * common / (sa + sb);
}

const Dense F{{2, 0}, {0, 0}};
const Dense F_HAT{{1, 1}, {0, 0}};
const Dense ZERO2{{0, 0}, {0, 0}};

}  // namespace

TEST_CASE("metric fixtures") {
  CHECK(rmse(from_dense(F), from_dense(F)) == 0.0);
  CHECK(rmse(from_dense(F), from_dense(ZERO2)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(smape(from_dense(F), from_dense(F)) == 0.0);
  CHECK(smape(from_dense(F_HAT), from_dense(F_HAT)) == 0.0);
  CHECK(smape(from_dense({{1}}), from_dense({{0}})) == 2.0);
  CHECK(std::abs(smape(from_dense(F), from_dense(F_HAT)) - (2.0 / 3.0 + 2.0) / 4.0) < 1e-12);
  CHECK(cpc(from_dense(F), from_dense(F)) == 1.0);
  CHECK(cpc(from_dense(F), from_dense({{0, 3}, {1, 0}})) == 0.0);
  CHECK(std::abs(cpc(from_dense(F), from_dense(F_HAT)) - 0.5) < 1e-12);
  CHECK_THROWS_AS(cpc(from_dense(ZERO2), from_dense(ZERO2)), UndefinedMetric);
  CHECK_THROWS_AS(rmse(from_dense(F), from_dense({{1}})), DimensionMismatch);
  CHECK_THROWS_AS(smape(ODMatrix(0), ODMatrix(0)), DimensionMismatch);
  CHECK_THROWS_AS(evaluate(from_dense(F), ODMatrix(3)), DimensionMismatch);
}

TEST_CASE("jsd fixtures") {
  const std::vector<double> half{0.5, 0.5}, skew{0.9, 0.1}, a{1, 0}, b{0, 1};
  CHECK(jsd(half, half) == 0.0);
  CHECK(std::abs(jsd(a, b) - 1.0) < 1e-12);
  // 1/2 KL(P||M) + 1/2 KL(Q||M), M = (0.7, 0.3), evaluated by hand.
  CHECK(std::abs(jsd(half, skew) - 0.1467931024360521) < 1e-9);
  CHECK_THROWS_AS(jsd(half, std::vector<double>{1.0}), DimensionMismatch);
  CHECK_THROWS_AS(jsd(half, std::vector<double>{0.5, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(jsd(half, std::vector<double>{1.5, -0.5}), InvalidArgument);
}

TEST_CASE("metrics match the naive dense computation") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 12;
    const auto a = random_dense(rng, n, 0.3, 20);
    auto b = random_dense(rng, n, 0.3, 20);
    b[0][0] += 1;  // never both all-zero
    const auto ma = from_dense(a), mb = from_dense(b);
    CHECK(std::abs(rmse(ma, mb) - naive_rmse(a, b)) < 1e-9);
    CHECK(std::abs(smape(ma, mb) - naive_smape(a, b)) < 1e-9);
    CHECK(std::abs(cpc(ma, mb) - naive_cpc(a, b)) < 1e-9);
    const auto r = evaluate(ma, mb);
    CHECK(r.entries == n * n);
    CHECK(r.smape_percent == doctest::Approx(100 * r.smape));
    CHECK(r.truth_total == ma.total());
  }
}

TEST_CASE("range invariants on 1000 fuzzed pairs") {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 8;
    const auto a = random_dense(rng, n, u(rng), 1 + rng() % 6);
    auto b = (t % 5 == 0) ? a : random_dense(rng, n, u(rng), 1 + rng() % 6);
    if (t % 7 == 0 && n > 1) b[1][0] = a[1][0] + 1;  // near-equal pairs
    const auto ma = from_dense(a), mb = from_dense(b);
    CHECK(rmse(ma, mb) >= 0.0);
    const double s = smape(ma, mb);
    CHECK(s >= 0.0);
    CHECK(s <= 2.0);
    if (ma.total() + mb.total() == 0) {
      CHECK_THROWS_AS(cpc(ma, mb), UndefinedMetric);
      continue;
    }
    const double c = cpc(ma, mb);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    CHECK((c == 1.0) == (a == b));

    std::vector<double> p(n), q(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = double(a[0][i]) + 0.5 * (i == 0);
      q[i] = double(b[0][i]);
    }
    q[n - 1] += 1;
    const auto norm = [](std::vector<double>& v) {
      double sum = 0;
      for (double x : v) sum += x;
      for (double& x : v) x /= sum;
    };
    norm(p);
    norm(q);
    const double d = jsd(p, q);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == jsd(q, p));
  }
}

TEST_CASE("binned errors") {
  const Grid g(GeoBounds{22.5, 22.53, 114.0, 114.03}, 1000);
  const auto n = g.size();
  REQUIRE(n == 16);

  SUBCASE("identical matrices have zero error everywhere") {
    std::mt19937_64 rng(1);
    const auto m = from_dense(random_dense(rng, n, 0.2, 9));
    for (auto mode : {BinMode::flow, BinMode::distance}) {
      for (const auto& b : binned_errors(m, m, g, mode, 5).bins) CHECK(b.rmse == 0.0);
    }
  }
  SUBCASE("a single nonzero entry populates one flow bin besides zero") {
    ODMatrix t(n);
    t.add(CellId{3}, CellId{4}, 7);
    const auto be = binned_errors(t, ODMatrix(n), g, BinMode::flow, 4);
    CHECK(be.bins.front().count == n * n - 1);
    CHECK(be.bins.back().count == 1);
    CHECK(be.bins.back().rmse == 7.0);
    CHECK(be.bins[1].count + be.bins[2].count == 0);
  }
  SUBCASE("filter oracle") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 25; ++t) {
      const auto a = random_dense(rng, n, 0.4, 30);
      const auto b = random_dense(rng, n, 0.4, 30);
      for (auto mode : {BinMode::flow, BinMode::distance}) {
        const std::size_t bins = 4;
        auto key = [&](std::uint32_t i, std::uint32_t j) {
          return mode == BinMode::flow ? double(a[i][j]) : g.travel_cost(CellId{i}, CellId{j});
        };
        double lo = mode == BinMode::flow ? 1e300 : 0.0, hi = 0;
        for (std::uint32_t i = 0; i < n; ++i) {
          for (std::uint32_t j = 0; j < n; ++j) {
            if (mode == BinMode::flow) lo = std::min(lo, key(i, j));
            hi = std::max(hi, key(i, j));
          }
        }
        const auto be = binned_errors(from_dense(a), from_dense(b), g, mode, bins);
        std::uint64_t count_sum = 0;
        for (std::size_t k = 0; k < bins; ++k) {
          const double blo = lo + (hi - lo) * double(k) / bins;
          const double bhi = lo + (hi - lo) * double(k + 1) / bins;
          double sq = 0;
          std::uint64_t cnt = 0;
          for (std::uint32_t i = 0; i < n; ++i) {
            for (std::uint32_t j = 0; j < n; ++j) {
              const double v = key(i, j);
              const bool in = v >= blo && (k + 1 == bins ? v <= hi : v < bhi);
              if (!in) continue;
              const double d = double(a[i][j]) - double(b[i][j]);
              sq += d * d;
              ++cnt;
            }
          }
          CHECK(be.bins[k].count == cnt);
          CHECK(be.bins[k].lo == doctest::Approx(blo));
          CHECK(be.bins[k].rmse == doctest::Approx(cnt ? std::sqrt(sq / double(cnt)) : 0.0));
          count_sum += be.bins[k].count;
        }
        CHECK(count_sum == n * n);
      }
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(binned_errors(ODMatrix(n), ODMatrix(n), g, BinMode::flow, 0), InvalidArgument);
    CHECK_THROWS_AS(binned_errors(ODMatrix(4), ODMatrix(4), g, BinMode::flow, 3), DimensionMismatch);
  }
  SUBCASE("csv") {
    testutil::TempDir dir("binned");
    ODMatrix t(n);
    t.add(CellId{0}, CellId{1}, 2);
    write_binned_csv(binned_errors(t, ODMatrix(n), g, BinMode::flow, 2), dir / "b.csv");
    CHECK(testutil::read_file(dir / "b.csv") ==
          "bin_lo,bin_hi,rmse,count\n0.000000,1.000000,0,255\n1.000000,2.000000,2,1\n");
  }
}

TEST_CASE("arc export") {
  const Grid g(GeoBounds{22.5, 22.58, 114.0, 114.08}, 1000);
  const auto n = g.size();
  testutil::TempDir dir("arcs");

  export_arcs(ODMatrix(n), g, 10, dir / "zero.json");
  CHECK(nlohmann::json::parse(testutil::read_file(dir / "zero.json")).empty());

  ODMatrix one(n);
  one.add(CellId{2}, CellId{30}, 4);
  export_arcs(one, g, 10, dir / "one.json");
  const auto j = nlohmann::json::parse(testutil::read_file(dir / "one.json"));
  REQUIRE(j.size() == 1);
  CHECK(j[0]["o_lat"].get<double>() == g.cell_center(CellId{2}).lat);
  CHECK(j[0]["o_lon"].get<double>() == g.cell_center(CellId{2}).lon);
  CHECK(j[0]["d_lat"].get<double>() == g.cell_center(CellId{30}).lat);
  CHECK(j[0]["d_lon"].get<double>() == g.cell_center(CellId{30}).lon);
  CHECK(j[0]["flow"] == 4);

  // 50 distinct random flows; the top 10 come out descending.
  std::mt19937_64 rng(50);
  std::vector<std::uint64_t> flows(50);
  for (std::size_t i = 0; i < flows.size(); ++i) flows[i] = 1 + 3 * i;
  std::shuffle(flows.begin(), flows.end(), rng);
  ODMatrix m(n);
  for (std::uint32_t i = 0; i < flows.size(); ++i) m.add(CellId{i}, CellId{(i * 7) % std::uint32_t(n)}, flows[i]);
  auto sorted = flows;
  std::sort(sorted.rbegin(), sorted.rend());
  const auto arcs = top_arcs(m, g, 10);
  REQUIRE(arcs.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(arcs[i].flow == sorted[i]);
  for (std::size_t i = 0; i < 3; ++i) CHECK(arcs[i].volume == "high");
  for (std::size_t i = 7; i < 10; ++i) {
    CHECK(arcs[i].volume == "low");
    CHECK(arcs[i].color == "blue");
  }
  CHECK(arcs[0].color == "yellow");
  CHECK(arcs[5].volume == "mid");
  CHECK(arcs[5].color == "red");

  // Equal volumes share a label and keep key order.
  ODMatrix ties(n);
  ties.add(CellId{5}, CellId{1}, 3);
  ties.add(CellId{1}, CellId{9}, 3);
  ties.add(CellId{0}, CellId{0}, 3);
  const auto t = top_arcs(ties, g, 2);
  REQUIRE(t.size() == 2);
  CHECK(t[0].origin.lat == g.cell_center(CellId{0}).lat);
  CHECK(t[1].origin.lat == g.cell_center(CellId{1}).lat);
  CHECK(t[0].volume == t[1].volume);
}
