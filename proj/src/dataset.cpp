#include "odflow/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"
#include "odflow/geo.hpp"

namespace odflow {
namespace {

constexpr std::string_view kInstructionTemplate =
    "Given the starting place and time of a taxi trajectory in {city}, predict the most likely "
    "destination and how far it is from the starting point.\n"
    "Please use the provided \"Candidate POIs\" list to describe the starting place and "
    "destination.\n"
    "Candidate POIs: [{pois}]";

std::string join_names(std::span<const std::size_t> categories, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (i) out += ", ";
    out += vocab.name(categories[i]);
  }
  return out;
}

void check_width(const SpatialFeature& f, const Vocabulary& vocab) {
  if (f.k() != vocab.size()) {
    throw DimensionMismatch(fmt::format("feature has {} entries, vocabulary {}", f.k(), vocab.size()));
  }
}

}  // namespace

double round_cost_km(double km) { return std::round(km * 1000.0) / 1000.0; }

TripFile read_trip_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  const auto olat = reader.require_column("o_lat");
  const auto olon = reader.require_column("o_lon");
  const auto dlat = reader.require_column("d_lat");
  const auto dlon = reader.require_column("d_lon");
  const auto time = reader.require_column("start_time");
  const auto width = std::max({olat, olon, dlat, dlon, time}) + 1;

  TripFile out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const auto line = reader.line_number();
    if (f.size() < width) {
      out.malformed.push_back({line, "too few fields"});
      continue;
    }
    const auto oa = csv::parse_double(f[olat]);
    const auto oo = csv::parse_double(f[olon]);
    const auto ts = parse_timestamp(f[time]);
    if (!oa || !oo) {
      out.malformed.push_back({line, "non-numeric origin coordinate"});
      continue;
    }
    if (!ts) {
      out.malformed.push_back({line, "bad start_time '" + f[time] + "'"});
      continue;
    }
    RawTrip trip{{*oa, *oo}, std::nullopt, *ts};
    const bool d_empty = csv::trim(f[dlat]).empty() && csv::trim(f[dlon]).empty();
    if (!d_empty) {
      const auto da = csv::parse_double(f[dlat]);
      const auto dn = csv::parse_double(f[dlon]);
      if (!da || !dn) {
        out.malformed.push_back({line, "non-numeric destination coordinate"});
        continue;
      }
      trip.destination = LatLon{*da, *dn};
    }
    out.rows.push_back(trip);
  }
  return out;
}

TripIngest ingest_trips(std::span<const RawTrip> rows, const Grid& grid) {
  TripIngest out;
  out.rows = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!r.destination) {
      ++out.missing_destination;
      out.diagnostics.push_back({i, "missing destination"});
      continue;
    }
    const auto o = grid.try_cell_of(r.origin.lat, r.origin.lon);
    const auto d = grid.try_cell_of(r.destination->lat, r.destination->lon);
    if (!o || !d) {
      ++out.out_of_bounds;
      out.diagnostics.push_back({i, "endpoint outside grid bounds"});
      continue;
    }
    const double km = geo::haversine_km(r.origin.lat, r.origin.lon, r.destination->lat,
                                        r.destination->lon);
    out.trips.push_back({*o, r.start_time, *d, round_cost_km(km)});
  }
  if (out.trips.empty()) {
    throw EmptyDataset(fmt::format("no valid trips among {} rows", out.rows));
  }
  return out;
}

TripIngest ingest_trips(const std::filesystem::path& path, const Grid& grid) {
  auto file = read_trip_csv(path);
  if (file.rows.empty()) {
    throw EmptyDataset(fmt::format("{}: no valid trips ({} malformed rows)", path.string(),
                                   file.malformed.size()));
  }
  auto out = ingest_trips(file.rows, grid);
  out.rows += file.malformed.size();
  out.malformed = file.malformed.size();
  out.diagnostics.insert(out.diagnostics.end(), file.malformed.begin(), file.malformed.end());
  return out;
}

OriginIngest ingest_origins(const std::filesystem::path& path, const Grid& grid) {
  auto file = read_trip_csv(path);
  OriginIngest out;
  out.rows = file.rows.size() + file.malformed.size();
  out.malformed = file.malformed.size();
  for (const auto& r : file.rows) {
    if (auto o = grid.try_cell_of(r.origin.lat, r.origin.lon)) {
      out.origins.push_back({*o, r.start_time});
    } else {
      ++out.out_of_bounds;
    }
  }
  return out;
}

std::vector<OdPoiSample> build_od_poi_dataset(const TripSet& trips, const CityFeatures& features) {
  std::vector<OdPoiSample> out;
  out.reserve(trips.size());
  for (const auto& t : trips) {
    out.push_back({features.feature(t.origin), t.start_time, features.feature(t.destination), t.cost_km});
  }
  return out;
}

OriginSet build_origin_set(const TripSet& trips) {
  OriginSet out;
  out.reserve(trips.size());
  for (const auto& t : trips) out.push_back({t.origin, t.start_time});
  return out;
}

std::string render_instruction_text(std::string_view city, const Vocabulary& vocab) {
  return fmt::format(fmt::runtime(kInstructionTemplate), fmt::arg("city", city),
                     fmt::arg("pois", vocab.joined()));
}

std::string render_input(std::span<const std::uint32_t> origin_counts, Timestamp start,
                         const Vocabulary& vocab) {
  if (origin_counts.size() != vocab.size()) {
    throw DimensionMismatch("origin feature width differs from vocabulary");
  }
  const auto names = nonzero_indices(origin_counts);
  return fmt::format("Starting place: [{}], Starting time: [{}]", join_names(names, vocab),
                     start.hhmm());
}

std::string render_response(std::span<const std::size_t> categories, double cost_km,
                            const Vocabulary& vocab) {
  return fmt::format("\"POIs\": [{}], \"traveling cost\": [{:.1f} kilometers]",
                     join_names(categories, vocab), cost_km);
}

InstructionSample render_instruction(const OdPoiSample& sample, std::string_view city,
                                     const Vocabulary& vocab) {
  check_width(sample.origin, vocab);
  check_width(sample.destination, vocab);
  const auto dest = sample.destination.nonzero();
  return {render_instruction_text(city, vocab), render_input(sample.origin.counts, sample.start_time, vocab),
          render_response(dest, sample.cost_km, vocab)};
}

void export_jsonl(std::span<const OdPoiSample> samples, std::string_view city,
                  const Vocabulary& vocab, const std::filesystem::path& path) {
  if (samples.empty()) throw EmptyDataset("no samples to export");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : samples) {
    const auto r = render_instruction(s, city, vocab);
    nlohmann::ordered_json j;
    j["instruction"] = r.instruction;
    j["input"] = r.input;
    j["output"] = r.output;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<InstructionSample> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<InstructionSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("instruction").get<std::string>(), j.at("input").get<std::string>(),
                     j.at("output").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw IoError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return out;
}

void write_origin_set(const OriginSet& origins, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "origin_cell,start_time\n";
  for (const auto& o : origins) out << o.origin.value << ',' << o.start_time.iso() << '\n';
}

OriginSet read_origin_set(const std::filesystem::path& path) {
  csv::Reader reader(path);
  const auto cell_col = reader.require_column("origin_cell");
  const auto time_col = reader.require_column("start_time");
  OriginSet out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    std::uint32_t cell = 0;
    const auto& s = f.at(cell_col);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), cell);
    const auto ts = parse_timestamp(f.at(time_col));
    if (ec != std::errc{} || p != s.data() + s.size() || !ts) {
      throw IoError(fmt::format("{}:{}: malformed origin row", path.string(), reader.line_number()));
    }
    out.push_back({CellId{cell}, *ts});
  }
  return out;
}

}  // namespace odflow
