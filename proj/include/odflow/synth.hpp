#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "odflow/dataset.hpp"
#include "odflow/features.hpp"
#include "odflow/grid.hpp"
#include "odflow/od_matrix.hpp"
#include "odflow/vocabulary.hpp"

namespace odflow {

enum class TargetLayout {
  identical,  ///< target cells carry the same archetypes as the source
  permuted,   ///< archetypes moved by a random non-identity grid symmetry
};

/// Parameters of a two-city scenario sharing one latent rule.
///
/// Every cell holds a distinct POI archetype. The rule sends (origin
/// archetype, hour) to a destination archetype; with probability `noise` a
/// trip goes to a uniformly random archetype instead.
struct ScenarioSpec {
  std::size_t rows = 8;
  std::size_t cols = 8;
  double cell_size_m = 1000.0;
  std::size_t k = 8;  ///< categories, taken from the head of the standard vocabulary
  std::size_t hours = 24;  ///< trips start in hours [0, hours)
  /// Source trips beyond the one-per-(cell, hour) coverage set.
  std::size_t extra_source_trips = 500;
  std::size_t target_trips = 1000;
  double noise = 0.1;
  TargetLayout layout = TargetLayout::permuted;
  double center_lon = 116.4;
  std::uint64_t seed = 1;

  /// Throws InvalidArgument for infeasible specs.
  void validate() const;
};

/// Symmetries of an equator-centred grid that preserve every pairwise
/// haversine distance between cell centres.
enum class GridSymmetry { identity, mirror_east_west, mirror_north_south, rotate_half_turn };

std::string to_string(GridSymmetry s);

struct SyntheticCity {
  std::string name;
  GeoBounds bounds;
  std::vector<PoiRecord> pois;
  std::vector<RawTrip> trips;  ///< full trips for the source, origin-only for the target
  std::vector<std::uint32_t> archetype;  ///< per cell
};

struct Scenario {
  ScenarioSpec spec;
  Vocabulary vocab;
  std::vector<std::vector<std::uint32_t>> archetypes;  ///< POI count vector of each archetype
  /// rule[a * hours + h] = destination archetype.
  std::vector<std::uint32_t> rule;
  GridSymmetry symmetry = GridSymmetry::identity;
  SyntheticCity source;
  SyntheticCity target;
  /// Ground truth for the target origins, from the latent rule directly.
  ODMatrix truth;
  std::vector<CellId> truth_destinations;  ///< per target origin row

  Grid grid() const { return Grid(source.bounds, spec.cell_size_m); }
};

/// Deterministic in spec.seed.
Scenario generate_scenario(const ScenarioSpec& spec);

/// Matches every target origin using the true destination archetype and the
/// true travel cost as the prediction, with the default match policy. Its
/// CPC against the truth is the best any predictor can reach.
ODMatrix oracle_od_matrix(const Scenario& scenario);

/// Writes vocab.txt, {source,target}_pois.csv, source_trips.csv,
/// target_origins.csv, target_truth_od.csv and a runnable config.json.
void write_scenario(const Scenario& scenario, const std::filesystem::path& dir);

}  // namespace odflow
