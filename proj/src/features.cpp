#include "odflow/features.hpp"

#include <charconv>
#include <fstream>

#include <fmt/format.h>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"

namespace odflow {

std::vector<std::size_t> nonzero_indices(std::span<const std::uint32_t> counts) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] != 0) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> SpatialFeature::nonzero() const { return nonzero_indices(counts); }

CityFeatures& CityFeatures::operator+=(const CityFeatures& other) {
  if (other.cells_ != cells_ || other.k_ != k_) {
    throw DimensionMismatch("cannot merge city features of different shapes");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::uint64_t CityFeatures::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts_) sum += c;
  return sum;
}

std::uint64_t CityFeatures::cell_total(CellId id) const {
  std::uint64_t sum = 0;
  for (auto c : (*this)[id]) sum += c;
  return sum;
}

PoiAssignment assign_pois(const Grid& grid, const Vocabulary& vocab,
                          std::span<const PoiRecord> pois) {
  PoiAssignment out{CityFeatures(grid.size(), vocab.size()), 0, 0, {}};
  for (std::size_t i = 0; i < pois.size(); ++i) {
    const auto& poi = pois[i];
    const auto category = vocab.index_of(poi.category);
    if (!category) {
      out.rejected.push_back({i, "unknown POI category '" + poi.category + "'"});
      continue;
    }
    const auto cell = grid.try_cell_of(poi.lat, poi.lon);
    if (!cell) {
      ++out.out_of_bounds;
      continue;
    }
    out.features.add(*cell, *category);
    ++out.accepted;
  }
  return out;
}

PoiFile read_poi_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  const auto lat_col = reader.require_column("lat");
  const auto lon_col = reader.require_column("lon");
  const auto cat_col = reader.require_column("category");
  const auto width = std::max({lat_col, lon_col, cat_col}) + 1;

  PoiFile out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() < width) {
      out.malformed.push_back({reader.line_number(), "too few fields"});
      continue;
    }
    const auto lat = csv::parse_double(f[lat_col]);
    const auto lon = csv::parse_double(f[lon_col]);
    if (!lat || !lon) {
      out.malformed.push_back({reader.line_number(), "non-numeric coordinate"});
      continue;
    }
    out.records.push_back({*lat, *lon, f[cat_col]});
  }
  return out;
}

void write_features_csv(const CityFeatures& features, const Vocabulary& vocab,
                        const std::filesystem::path& path) {
  if (features.k() != vocab.size()) throw DimensionMismatch("feature width differs from vocabulary");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "cell";
  for (const auto& name : vocab.names()) out << ",\"" << name << '"';
  out << '\n';
  for (std::uint32_t i = 0; i < features.cells(); ++i) {
    out << i;
    for (auto c : features[CellId{i}]) out << ',' << c;
    out << '\n';
  }
}

CityFeatures read_features_csv(const std::filesystem::path& path, const Vocabulary& vocab) {
  csv::Reader reader(path);
  if (reader.header().size() != vocab.size() + 1) {
    throw DimensionMismatch(path.string() + ": feature columns differ from vocabulary");
  }
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != vocab.size() + 1) {
      throw IoError(fmt::format("{}:{}: wrong field count", path.string(), reader.line_number()));
    }
    std::vector<std::uint32_t> row(vocab.size());
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      const auto& s = f[k + 1];
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), row[k]);
      if (ec != std::errc{} || p != s.data() + s.size()) {
        throw IoError(fmt::format("{}:{}: bad count", path.string(), reader.line_number()));
      }
    }
    rows.push_back(std::move(row));
  }
  CityFeatures features(rows.size(), vocab.size());
  for (std::uint32_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < vocab.size(); ++k) features.add(CellId{i}, k, rows[i][k]);
  }
  return features;
}

}  // namespace odflow
