#include "odflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "odflow/error.hpp"
#include "odflow/geo.hpp"

namespace odflow {
namespace {

// Points within this fraction of a cell below an interior edge snap onto the
// edge, so coordinates computed as min + k * step land in cell k.
constexpr double kEdgeSnap = 1e-9;

}  // namespace

void GeoBounds::validate() const {
  const bool finite = std::isfinite(min_lat) && std::isfinite(max_lat) &&
                      std::isfinite(min_lon) && std::isfinite(max_lon);
  if (!finite || min_lat < -90.0 || max_lat > 90.0 || min_lon < -180.0 || max_lon > 180.0) {
    throw InvalidBounds(fmt::format("bounds out of range: lat [{}, {}] lon [{}, {}]", min_lat,
                                    max_lat, min_lon, max_lon));
  }
  if (!(min_lat < max_lat) || !(min_lon < max_lon)) {
    throw InvalidBounds(fmt::format("degenerate bounds: lat [{}, {}] lon [{}, {}]", min_lat,
                                    max_lat, min_lon, max_lon));
  }
}

Grid::Grid(const GeoBounds& bounds, double cell_size_m) : bounds_(bounds), cell_size_m_(cell_size_m) {
  bounds_.validate();
  if (!(cell_size_m > 0.0) || !std::isfinite(cell_size_m)) {
    throw InvalidArgument(fmt::format("cell size must be positive, got {}", cell_size_m));
  }
  const double m_lat = geo::meters_per_degree_lat();
  const double m_lon = geo::meters_per_degree_lon(bounds_.mid_lat());
  if (!(m_lon > 0.0)) throw InvalidBounds("bounds touch a pole");

  cell_h_deg_ = cell_size_m / m_lat;
  cell_w_deg_ = cell_size_m / m_lon;

  const double ns_cells = (bounds_.max_lat - bounds_.min_lat) * m_lat / cell_size_m;
  const double ew_cells = (bounds_.max_lon - bounds_.min_lon) * m_lon / cell_size_m;
  // Extents that are whole multiples of the cell size up to rounding noise
  // must not gain a sliver row.
  rows_ = static_cast<std::size_t>(std::max(1.0, std::ceil(ns_cells - kEdgeSnap)));
  cols_ = static_cast<std::size_t>(std::max(1.0, std::ceil(ew_cells - kEdgeSnap)));
  if (rows_ * cols_ > 0xFFFFFFFFull) throw InvalidArgument("grid too large for 32-bit cell ids");
  extent_ = bounds_;
  extent_.max_lat = std::max(bounds_.max_lat, bounds_.min_lat + static_cast<double>(rows_) * cell_h_deg_);
  extent_.max_lon = std::max(bounds_.max_lon, bounds_.min_lon + static_cast<double>(cols_) * cell_w_deg_);
}

std::size_t Grid::axis_index(double offset_deg, double step_deg, std::size_t count) const {
  const double x = offset_deg / step_deg;
  double idx = std::floor(x);
  if (idx + 1.0 - x < kEdgeSnap) idx += 1.0;
  if (idx < 0.0) idx = 0.0;
  const auto i = static_cast<std::size_t>(idx);
  return i >= count ? count - 1 : i;
}

std::optional<CellId> Grid::try_cell_of(double lat, double lon) const {
  if (!std::isfinite(lat) || !std::isfinite(lon) || !contains(lat, lon)) return std::nullopt;
  const auto r = axis_index(lat - bounds_.min_lat, cell_h_deg_, rows_);
  const auto c = axis_index(lon - bounds_.min_lon, cell_w_deg_, cols_);
  return at(r, c);
}

CellId Grid::cell_of(double lat, double lon) const {
  if (auto id = try_cell_of(lat, lon)) return *id;
  throw OutOfBounds(fmt::format("point ({}, {}) is outside the grid", lat, lon));
}

void Grid::check(CellId id) const {
  if (!valid(id)) {
    throw InvalidCell(fmt::format("cell {} out of range [0, {})", id.value, size()));
  }
}

LatLon Grid::cell_center(CellId id) const {
  check(id);
  const auto r = static_cast<double>(row_of(id));
  const auto c = static_cast<double>(col_of(id));
  return {bounds_.min_lat + (r + 0.5) * cell_h_deg_, bounds_.min_lon + (c + 0.5) * cell_w_deg_};
}

double Grid::travel_cost(CellId a, CellId b) const {
  check(a);
  check(b);
  if (a == b) return 0.0;
  const auto pa = cell_center(a);
  const auto pb = cell_center(b);
  return geo::haversine_km(pa.lat, pa.lon, pb.lat, pb.lon);
}

}  // namespace odflow
