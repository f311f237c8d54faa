#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "odflow/features.hpp"
#include "odflow/grid.hpp"
#include "odflow/timestamp.hpp"
#include "odflow/vocabulary.hpp"

namespace odflow {

/// One row of a trip file. Origin-only records leave `destination` empty.
struct RawTrip {
  LatLon origin;
  std::optional<LatLon> destination;
  Timestamp start_time;
};

struct Trip {
  CellId origin;
  Timestamp start_time;
  CellId destination;
  double cost_km = 0.0;

  friend bool operator==(const Trip&, const Trip&) = default;
};

using TripSet = std::vector<Trip>;

struct OriginEntry {
  CellId origin;
  Timestamp start_time;

  friend bool operator==(const OriginEntry&, const OriginEntry&) = default;
};

using OriginSet = std::vector<OriginEntry>;

/// A trip seen through the POI features of its endpoint cells.
struct OdPoiSample {
  SpatialFeature origin;
  Timestamp start_time;
  SpatialFeature destination;
  double cost_km = 0.0;
};

struct TripFile {
  std::vector<RawTrip> rows;
  std::vector<RecordDiagnostic> malformed;  ///< keyed by file line
};

/// Reads `o_lat,o_lon,d_lat,d_lon,start_time`. Empty destination fields
/// yield origin-only rows; a half-filled destination is malformed.
TripFile read_trip_csv(const std::filesystem::path& path);

struct TripIngest {
  TripSet trips;
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::size_t out_of_bounds = 0;
  std::size_t missing_destination = 0;
  std::vector<RecordDiagnostic> diagnostics;
};

/// Maps trip endpoints onto the grid. cost_km is the haversine distance of
/// the raw endpoints, stored at 3-decimal precision. Throws EmptyDataset when
/// no row survives.
TripIngest ingest_trips(std::span<const RawTrip> rows, const Grid& grid);
TripIngest ingest_trips(const std::filesystem::path& path, const Grid& grid);

struct OriginIngest {
  OriginSet origins;
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::size_t out_of_bounds = 0;
};

/// Origin set from any trip-shaped file; destinations are ignored. An empty
/// result is allowed.
OriginIngest ingest_origins(const std::filesystem::path& path, const Grid& grid);

/// One sample per trip, in trip order.
std::vector<OdPoiSample> build_od_poi_dataset(const TripSet& trips, const CityFeatures& features);

OriginSet build_origin_set(const TripSet& trips);

/// Storage precision of trip costs.
double round_cost_km(double km);

/// (instruction, input, output) triple for supervised fine-tuning.
struct InstructionSample {
  std::string instruction;
  std::string input;
  std::string output;

  friend bool operator==(const InstructionSample&, const InstructionSample&) = default;
};

std::string render_instruction_text(std::string_view city, const Vocabulary& vocab);
std::string render_input(std::span<const std::uint32_t> origin_counts, Timestamp start,
                         const Vocabulary& vocab);
/// `"POIs": [a, b], "traveling cost": [c kilometers]` with c at one decimal.
std::string render_response(std::span<const std::size_t> categories, double cost_km,
                            const Vocabulary& vocab);

InstructionSample render_instruction(const OdPoiSample& sample, std::string_view city,
                                     const Vocabulary& vocab);

/// One JSON object per line with keys instruction, input, output.
void export_jsonl(std::span<const OdPoiSample> samples, std::string_view city,
                  const Vocabulary& vocab, const std::filesystem::path& path);
std::vector<InstructionSample> read_jsonl(const std::filesystem::path& path);

/// CSV `origin_cell,start_time` (ISO minutes).
void write_origin_set(const OriginSet& origins, const std::filesystem::path& path);
OriginSet read_origin_set(const std::filesystem::path& path);

}  // namespace odflow
