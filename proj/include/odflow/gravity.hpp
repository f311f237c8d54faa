#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "odflow/dataset.hpp"
#include "odflow/features.hpp"
#include "odflow/grid.hpp"
#include "odflow/od_matrix.hpp"

namespace odflow {

enum class MassSource {
  poi_total,      ///< total POI count per cell
  origin_counts,  ///< number of origin-set entries starting in the cell
};

struct GravityParams {
  double beta = 2.0;
  MassSource mass = MassSource::poi_total;
};

/// Per-cell masses for the gravity baseline.
std::vector<double> gravity_masses(MassSource source, const CityFeatures& features,
                                   const OriginSet& origins);

struct GravityFlow {
  CellId origin;
  CellId dest;
  double flow = 0.0;
};

struct GravityFlows {
  double g = 0.0;  ///< calibrated scale
  std::vector<GravityFlow> flows;  ///< off-diagonal pairs of nonzero masses, (origin, dest) order
};

/// f_ij = G m_i m_j / d_ij^beta for i != j, G chosen so the flows sum to
/// total_trips. Throws DegenerateInput when every mass is zero.
GravityFlows gravity_flows(std::span<const double> masses, const Grid& grid, const GravityParams& params,
                           std::uint64_t total_trips);

/// gravity_flows rounded to integers by the largest-remainder method, so the
/// matrix sums to total_trips exactly (ties go to the lower (i, j)).
ODMatrix gravity_od_matrix(std::span<const double> masses, const Grid& grid, const GravityParams& params,
                           std::uint64_t total_trips);

/// Grid search of beta minimizing RMSE against an observed matrix. Ties keep
/// the earlier candidate.
double calibrate_beta(std::span<const double> masses, const Grid& grid, const ODMatrix& observed,
                      MassSource mass, std::span<const double> candidates);

}  // namespace odflow
