#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>

namespace odflow {

/// Geographic bounding box in WGS-84 degrees.
struct GeoBounds {
  double min_lat = 0.0;
  double max_lat = 0.0;
  double min_lon = 0.0;
  double max_lon = 0.0;

  /// Throws InvalidBounds unless min < max on both axes and all values are
  /// inside the valid latitude/longitude ranges.
  void validate() const;

  double mid_lat() const { return 0.5 * (min_lat + max_lat); }
  bool contains(double lat, double lon) const {
    return lat >= min_lat && lat <= max_lat && lon >= min_lon && lon <= max_lon;
  }
};

/// Row-major cell index: value == row * cols + col, row 0 at min_lat and
/// column 0 at min_lon.
struct CellId {
  std::uint32_t value = 0;

  constexpr auto operator<=>(const CellId&) const = default;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Uniform partition of a bounding box into square cells of side
/// cell_size_m. Cells are squares in the local metric taken at the bounds'
/// mid-latitude; the last row/column may overhang max_lat/max_lon.
class Grid {
 public:
  Grid(const GeoBounds& bounds, double cell_size_m);

  const GeoBounds& bounds() const { return bounds_; }
  double cell_size_m() const { return cell_size_m_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return rows_ * cols_; }

  /// Cell height/width in degrees.
  double cell_height_deg() const { return cell_h_deg_; }
  double cell_width_deg() const { return cell_w_deg_; }

  /// Area covered by whole cells: the bounds extended up to the far edge of
  /// the last row/column. Points here belong to the grid even when they lie
  /// in the overhang past max_lat/max_lon.
  const GeoBounds& extent() const { return extent_; }
  bool contains(double lat, double lon) const { return extent_.contains(lat, lon); }
  bool valid(CellId id) const { return id.value < size(); }

  /// Containing cell under half-open [edge, edge + size) intervals; the last
  /// row/column also owns its closing edge. Throws OutOfBounds.
  CellId cell_of(double lat, double lon) const;
  std::optional<CellId> try_cell_of(double lat, double lon) const;

  /// Geometric center of a cell. Throws InvalidCell.
  LatLon cell_center(CellId id) const;

  /// Haversine distance between cell centers, km. Exactly 0 for a == b.
  double travel_cost(CellId a, CellId b) const;

  std::size_t row_of(CellId id) const { return id.value / cols_; }
  std::size_t col_of(CellId id) const { return id.value % cols_; }
  CellId at(std::size_t row, std::size_t col) const {
    return CellId{static_cast<std::uint32_t>(row * cols_ + col)};
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  void check(CellId id) const;
  std::size_t axis_index(double offset_deg, double step_deg, std::size_t count) const;

  GeoBounds bounds_;
  GeoBounds extent_;
  double cell_size_m_ = 0.0;
  double cell_h_deg_ = 0.0;
  double cell_w_deg_ = 0.0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

inline Grid build_grid(const GeoBounds& bounds, double cell_size_m) {
  return Grid(bounds, cell_size_m);
}

}  // namespace odflow
