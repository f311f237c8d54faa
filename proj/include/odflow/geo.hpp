#pragma once

#include <cmath>
#include <numbers>

namespace odflow::geo {

/// Mean Earth radius (IUGG), kilometers.
inline constexpr double kEarthRadiusKm = 6371.0088;

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Meters spanned by one degree of latitude on the reference sphere.
inline constexpr double meters_per_degree_lat() {
  return kEarthRadiusKm * 1000.0 * std::numbers::pi / 180.0;
}

/// Meters spanned by one degree of longitude at the given latitude.
inline double meters_per_degree_lon(double lat_deg) {
  return meters_per_degree_lat() * std::cos(deg2rad(lat_deg));
}

/// Great-circle distance in kilometers.
inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  const double phi1 = deg2rad(lat1);
  const double phi2 = deg2rad(lat2);
  const double dphi = deg2rad(lat2 - lat1);
  const double dlambda = deg2rad(lon2 - lon1);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::fmin(1.0, h)));
}

}  // namespace odflow::geo
