#include "odflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "odflow/error.hpp"
#include "odflow/geo.hpp"
#include "odflow/matching.hpp"

namespace odflow {

namespace {

constexpr std::size_t kMaxCategories = 23;

std::vector<std::string> head_of_standard(std::size_t k) {
  auto names = Vocabulary::standard().names();
  names.resize(k);
  return names;
}

CellId apply(GridSymmetry s, const Grid& g, CellId c) {
  std::size_t r = g.row_of(c), col = g.col_of(c);
  if (s == GridSymmetry::mirror_east_west || s == GridSymmetry::rotate_half_turn) col = g.cols() - 1 - col;
  if (s == GridSymmetry::mirror_north_south || s == GridSymmetry::rotate_half_turn) r = g.rows() - 1 - r;
  return g.at(r, col);
}

Timestamp start_at(std::size_t hour, int minute) {
  return Timestamp::from_civil(2024, 5, 6, static_cast<int>(hour), minute);
}

std::string format_trip(const RawTrip& t) {
  if (t.destination) {
    return fmt::format("{},{},{},{},{}\n", t.origin.lat, t.origin.lon, t.destination->lat, t.destination->lon,
                       t.start_time.iso());
  }
  return fmt::format("{},{},,,{}\n", t.origin.lat, t.origin.lon, t.start_time.iso());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_pois(const std::vector<PoiRecord>& pois, const std::filesystem::path& path) {
  std::string s = "lat,lon,category\n";
  for (const auto& p : pois) s += fmt::format("{},{},{}\n", p.lat, p.lon, p.category);
  write_text(path, s);
}

void write_trips(const std::vector<RawTrip>& trips, const std::filesystem::path& path) {
  std::string s = "o_lat,o_lon,d_lat,d_lon,start_time\n";
  for (const auto& t : trips) s += format_trip(t);
  write_text(path, s);
}

nlohmann::ordered_json bounds_json(const GeoBounds& b) {
  return {{"min_lat", b.min_lat}, {"max_lat", b.max_lat}, {"min_lon", b.min_lon}, {"max_lon", b.max_lon}};
}

}  // namespace

void ScenarioSpec::validate() const {
  if (rows == 0 || cols == 0) throw InvalidArgument("scenario grid has zero cells");
  if (!std::isfinite(cell_size_m) || cell_size_m <= 0.0) throw InvalidArgument("cell_size_m must be > 0");
  if (k < 2 || k > kMaxCategories) {
    throw InvalidArgument(fmt::format("k must be in [2, {}]", kMaxCategories));
  }
  const std::size_t archetypes = (std::size_t{1} << k) - 2;
  if (rows * cols > archetypes) {
    throw InvalidArgument(fmt::format("{} cells need more distinct archetypes than k={} allows ({})", rows * cols,
                                      k, archetypes));
  }
  if (hours == 0 || hours > 24) throw InvalidArgument("hours must be in [1, 24]");
  if (!(noise >= 0.0 && noise <= 1.0)) throw InvalidArgument("noise must be in [0, 1]");
  if (!std::isfinite(center_lon) || std::abs(center_lon) > 170.0) throw InvalidArgument("center_lon out of range");
  const double half_lat = 0.5 * static_cast<double>(rows) * cell_size_m / geo::meters_per_degree_lat();
  const double half_lon = 0.5 * static_cast<double>(cols) * cell_size_m / geo::meters_per_degree_lat();
  if (half_lat >= 60.0 || half_lon >= 9.0) throw InvalidArgument("scenario grid too large");
  if (layout == TargetLayout::permuted && rows == 1 && cols == 1) {
    throw InvalidArgument("a 1x1 grid has no non-identity layout");
  }
}

std::string to_string(GridSymmetry s) {
  switch (s) {
    case GridSymmetry::identity: return "identity";
    case GridSymmetry::mirror_east_west: return "mirror_east_west";
    case GridSymmetry::mirror_north_south: return "mirror_north_south";
    case GridSymmetry::rotate_half_turn: return "rotate_half_turn";
  }
  return "unknown";
}

Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t n = spec.rows * spec.cols;

  // Centred on the equator the mirror images and the half turn keep every
  // centre-to-centre distance, so travel costs carry over between cities.
  const double half_lat = 0.5 * static_cast<double>(spec.rows) * spec.cell_size_m / geo::meters_per_degree_lat();
  const double half_lon = 0.5 * static_cast<double>(spec.cols) * spec.cell_size_m / geo::meters_per_degree_lat();
  const GeoBounds bounds{-half_lat, half_lat, spec.center_lon - half_lon, spec.center_lon + half_lon};
  const Grid grid(bounds, spec.cell_size_m);
  if (grid.rows() != spec.rows || grid.cols() != spec.cols) {
    throw InvalidArgument("scenario bounds do not reproduce the requested grid");
  }

  Scenario sc{spec, Vocabulary(head_of_standard(spec.k)), {}, {}, GridSymmetry::identity, {}, {}, ODMatrix(n), {}};

  std::uniform_int_distribution<std::uint64_t> mask_dist(1, (std::uint64_t{1} << spec.k) - 2);
  std::uniform_int_distribution<std::uint32_t> count_dist(1, 3);
  std::set<std::uint64_t> used;
  while (sc.archetypes.size() < n) {
    const auto mask = mask_dist(rng);
    if (!used.insert(mask).second) continue;
    std::vector<std::uint32_t> counts(spec.k, 0);
    for (std::size_t c = 0; c < spec.k; ++c) {
      if (mask >> c & 1u) counts[c] = count_dist(rng);
    }
    sc.archetypes.push_back(std::move(counts));
  }

  std::uniform_int_distribution<std::uint32_t> arch_dist(0, static_cast<std::uint32_t>(n - 1));
  sc.rule.resize(n * spec.hours);
  for (auto& r : sc.rule) r = arch_dist(rng);

  if (spec.layout == TargetLayout::permuted) {
    std::vector<GridSymmetry> options;
    if (spec.cols > 1) options.push_back(GridSymmetry::mirror_east_west);
    if (spec.rows > 1) options.push_back(GridSymmetry::mirror_north_south);
    options.push_back(GridSymmetry::rotate_half_turn);
    sc.symmetry = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
  }

  sc.source.name = "Source City";
  sc.target.name = "Target City";
  sc.source.bounds = sc.target.bounds = bounds;
  sc.source.archetype.resize(n);
  std::vector<std::uint32_t> arch_cell_source(n), arch_cell_target(n);
  {
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    sc.source.archetype = order;
  }
  sc.target.archetype.resize(n);
  for (std::uint32_t c = 0; c < n; ++c) {
    sc.target.archetype[apply(sc.symmetry, grid, CellId{c}).value] = sc.source.archetype[c];
  }
  for (std::uint32_t c = 0; c < n; ++c) {
    arch_cell_source[sc.source.archetype[c]] = c;
    arch_cell_target[sc.target.archetype[c]] = c;
  }

  std::uniform_real_distribution<double> inside(0.05, 0.95);
  auto place = [&](SyntheticCity& city) {
    for (std::uint32_t c = 0; c < n; ++c) {
      const double lat0 = bounds.min_lat + static_cast<double>(grid.row_of(CellId{c})) * grid.cell_height_deg();
      const double lon0 = bounds.min_lon + static_cast<double>(grid.col_of(CellId{c})) * grid.cell_width_deg();
      const auto& counts = sc.archetypes[city.archetype[c]];
      for (std::size_t cat = 0; cat < spec.k; ++cat) {
        for (std::uint32_t j = 0; j < counts[cat]; ++j) {
          city.pois.push_back({lat0 + inside(rng) * grid.cell_height_deg(),
                               lon0 + inside(rng) * grid.cell_width_deg(), sc.vocab.name(cat)});
        }
      }
    }
  };
  place(sc.source);
  place(sc.target);

  std::bernoulli_distribution noisy(spec.noise);
  std::uniform_int_distribution<int> minute_dist(0, 59);
  std::uniform_int_distribution<std::size_t> hour_dist(0, spec.hours - 1);
  std::uniform_int_distribution<std::uint32_t> cell_dist(0, static_cast<std::uint32_t>(n - 1));
  auto destination = [&](std::uint32_t origin_arch, std::size_t hour) {
    const bool flip = noisy(rng);
    const auto random_arch = arch_dist(rng);
    return flip ? random_arch : sc.rule[origin_arch * spec.hours + hour];
  };
  auto center = [&](std::uint32_t c) { return grid.cell_center(CellId{c}); };

  std::vector<std::pair<std::uint32_t, std::size_t>> starts;
  for (std::uint32_t c = 0; c < n; ++c) {
    for (std::size_t h = 0; h < spec.hours; ++h) starts.emplace_back(c, h);
  }
  for (std::size_t i = 0; i < spec.extra_source_trips; ++i) starts.emplace_back(cell_dist(rng), hour_dist(rng));
  std::shuffle(starts.begin(), starts.end(), rng);
  for (const auto& [c, h] : starts) {
    const auto d = arch_cell_source[destination(sc.source.archetype[c], h)];
    sc.source.trips.push_back({center(c), center(d), start_at(h, minute_dist(rng))});
  }

  for (std::size_t i = 0; i < spec.target_trips; ++i) {
    const auto c = cell_dist(rng);
    const auto h = hour_dist(rng);
    const auto d = arch_cell_target[destination(sc.target.archetype[c], h)];
    sc.target.trips.push_back({center(c), std::nullopt, start_at(h, minute_dist(rng))});
    sc.truth.add(CellId{c}, CellId{d});
    sc.truth_destinations.push_back(CellId{d});
  }
  return sc;
}

ODMatrix oracle_od_matrix(const Scenario& sc) {
  const Grid grid = sc.grid();
  const auto features = assign_pois(grid, sc.vocab, sc.target.pois).features;
  const DestinationMatcher matcher(grid, features, LossWeights::unit(sc.vocab.size()), MatchPolicy{});
  ODMatrix m(grid.size());
  for (std::size_t i = 0; i < sc.target.trips.size(); ++i) {
    const auto o = grid.cell_of(sc.target.trips[i].origin.lat, sc.target.trips[i].origin.lon);
    const auto d = sc.truth_destinations[i];
    const auto& counts = sc.archetypes[sc.target.archetype[d.value]];
    const Prediction pred{{counts.begin(), counts.end()}, grid.travel_cost(o, d)};
    m.add(o, matcher.match(o, pred));
  }
  return m;
}

void write_scenario(const Scenario& sc, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  sc.vocab.save(dir / "vocab.txt");
  write_pois(sc.source.pois, dir / "source_pois.csv");
  write_pois(sc.target.pois, dir / "target_pois.csv");
  write_trips(sc.source.trips, dir / "source_trips.csv");
  write_trips(sc.target.trips, dir / "target_origins.csv");
  sc.truth.write_csv(dir / "target_truth_od.csv");

  nlohmann::ordered_json cfg;
  cfg["vocabulary"] = "vocab.txt";
  cfg["source"] = {{"name", sc.source.name},
                   {"bounds", bounds_json(sc.source.bounds)},
                   {"cell_size_m", sc.spec.cell_size_m},
                   {"pois", "source_pois.csv"},
                   {"trips", "source_trips.csv"}};
  cfg["target"] = {{"name", sc.target.name},
                   {"bounds", bounds_json(sc.target.bounds)},
                   {"cell_size_m", sc.spec.cell_size_m},
                   {"pois", "target_pois.csv"},
                   {"origins", "target_origins.csv"},
                   {"truth", "target_truth_od.csv"}};
  cfg["predictor"] = {{"kind", "frequency"}};
  cfg["loss"] = {{"alpha", 1.0}, {"alpha_sweep", {0.25, 0.5, 1.0, 2.0, 4.0}}};
  cfg["output_dir"] = "out";
  cfg["seed"] = sc.spec.seed;
  write_text(dir / "config.json", cfg.dump(2) + "\n");
}

}  // namespace odflow
