#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "odflow/grid.hpp"
#include "odflow/vocabulary.hpp"

namespace odflow {

/// POI counts of one cell, one entry per vocabulary category.
struct SpatialFeature {
  std::vector<std::uint32_t> counts;

  std::size_t k() const { return counts.size(); }
  std::vector<double> as_doubles() const { return {counts.begin(), counts.end()}; }
  /// Indices of categories with a nonzero count, ascending.
  std::vector<std::size_t> nonzero() const;

  friend bool operator==(const SpatialFeature&, const SpatialFeature&) = default;
};

std::vector<std::size_t> nonzero_indices(std::span<const std::uint32_t> counts);

/// Spatial features of every cell of a city; cells without POIs hold zeros.
class CityFeatures {
 public:
  CityFeatures() = default;
  CityFeatures(std::size_t cells, std::size_t k) : cells_(cells), k_(k), counts_(cells * k, 0) {}

  std::size_t cells() const { return cells_; }
  std::size_t k() const { return k_; }

  std::span<const std::uint32_t> operator[](CellId id) const {
    return {counts_.data() + static_cast<std::size_t>(id.value) * k_, k_};
  }
  SpatialFeature feature(CellId id) const {
    auto s = (*this)[id];
    return {{s.begin(), s.end()}};
  }

  void add(CellId id, std::size_t category, std::uint32_t n = 1) {
    counts_[static_cast<std::size_t>(id.value) * k_ + category] += n;
  }

  /// Elementwise sum, for merging features built from disjoint POI shards.
  CityFeatures& operator+=(const CityFeatures& other);

  std::uint64_t total() const;
  std::uint64_t cell_total(CellId id) const;

  friend bool operator==(const CityFeatures&, const CityFeatures&) = default;

 private:
  std::size_t cells_ = 0;
  std::size_t k_ = 0;
  std::vector<std::uint32_t> counts_;
};

struct PoiRecord {
  double lat = 0.0;
  double lon = 0.0;
  std::string category;
};

struct RecordDiagnostic {
  std::size_t record = 0;  ///< 0-based record index, or file line for parsers
  std::string message;
};

struct PoiAssignment {
  CityFeatures features;
  std::size_t accepted = 0;
  std::size_t out_of_bounds = 0;
  std::vector<RecordDiagnostic> rejected;  ///< unknown categories
};

/// Counts each POI into its containing cell. Out-of-bounds records are
/// counted and skipped; unknown categories are rejected with a diagnostic.
PoiAssignment assign_pois(const Grid& grid, const Vocabulary& vocab,
                          std::span<const PoiRecord> pois);

struct PoiFile {
  std::vector<PoiRecord> records;
  std::vector<RecordDiagnostic> malformed;  ///< keyed by file line
};

/// Reads a `lat,lon,category` CSV.
PoiFile read_poi_csv(const std::filesystem::path& path);

/// Dense CSV: header `cell,<category names...>`, one row per cell.
void write_features_csv(const CityFeatures& features, const Vocabulary& vocab,
                        const std::filesystem::path& path);
CityFeatures read_features_csv(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace odflow
