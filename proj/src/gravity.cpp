#include "odflow/gravity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "odflow/error.hpp"
#include "odflow/eval.hpp"

namespace odflow {

std::vector<double> gravity_masses(MassSource source, const CityFeatures& features,
                                   const OriginSet& origins) {
  std::vector<double> m(features.cells(), 0.0);
  if (source == MassSource::poi_total) {
    for (std::uint32_t i = 0; i < features.cells(); ++i) {
      m[i] = static_cast<double>(features.cell_total(CellId{i}));
    }
  } else {
    for (const auto& o : origins) {
      if (o.origin.value >= m.size()) throw InvalidCell("origin outside the feature grid");
      m[o.origin.value] += 1.0;
    }
  }
  return m;
}

GravityFlows gravity_flows(std::span<const double> masses, const Grid& grid, const GravityParams& params,
                           std::uint64_t total_trips) {
  if (masses.size() != grid.size()) {
    throw DimensionMismatch(fmt::format("{} masses for a {}-cell grid", masses.size(), grid.size()));
  }
  if (!std::isfinite(params.beta)) throw InvalidArgument("gravity beta must be finite");
  std::vector<std::uint32_t> active;
  for (std::uint32_t i = 0; i < masses.size(); ++i) {
    if (!std::isfinite(masses[i]) || masses[i] < 0.0) {
      throw InvalidArgument(fmt::format("mass of cell {} is {}", i, masses[i]));
    }
    if (masses[i] > 0.0) active.push_back(i);
  }
  if (active.empty()) throw DegenerateInput("all gravity masses are zero");

  GravityFlows out;
  double raw_sum = 0.0;
  for (auto i : active) {
    for (auto j : active) {
      if (i == j) continue;
      const double d = grid.travel_cost(CellId{i}, CellId{j});
      const double f = masses[i] * masses[j] / std::pow(d, params.beta);
      out.flows.push_back({CellId{i}, CellId{j}, f});
      raw_sum += f;
    }
  }
  if (raw_sum <= 0.0 || total_trips == 0) {
    for (auto& f : out.flows) f.flow = 0.0;
    return out;
  }
  out.g = static_cast<double>(total_trips) / raw_sum;
  for (auto& f : out.flows) f.flow *= out.g;
  return out;
}

ODMatrix gravity_od_matrix(std::span<const double> masses, const Grid& grid, const GravityParams& params,
                           std::uint64_t total_trips) {
  const auto gf = gravity_flows(masses, grid, params, total_trips);
  ODMatrix m(grid.size());
  if (gf.g == 0.0) return m;

  struct Part {
    std::size_t index;
    std::uint64_t whole;
    double remainder;
  };
  std::vector<Part> parts;
  parts.reserve(gf.flows.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < gf.flows.size(); ++i) {
    const double fl = std::floor(gf.flows[i].flow);
    parts.push_back({i, static_cast<std::uint64_t>(fl), gf.flows[i].flow - fl});
    assigned += static_cast<std::uint64_t>(fl);
  }
  // Floating-point slack can push the floor sum one past the target.
  while (assigned > total_trips) {
    auto it = std::min_element(parts.begin(), parts.end(), [](const Part& a, const Part& b) {
      return a.whole == 0 ? false : (b.whole == 0 ? true : a.remainder < b.remainder);
    });
    --it->whole;
    it->remainder += 1.0;
    --assigned;
  }
  auto order = parts;
  std::stable_sort(order.begin(), order.end(),
                   [](const Part& a, const Part& b) { return a.remainder > b.remainder; });
  const auto missing = std::min<std::uint64_t>(total_trips - assigned, order.size());
  for (std::uint64_t r = 0; r < missing; ++r) ++parts[order[r].index].whole;
  for (const auto& p : parts) m.add(gf.flows[p.index].origin, gf.flows[p.index].dest, p.whole);
  return m;
}

double calibrate_beta(std::span<const double> masses, const Grid& grid, const ODMatrix& observed,
                      MassSource mass, std::span<const double> candidates) {
  if (candidates.empty()) throw InvalidArgument("no beta candidates");
  double best_beta = candidates.front();
  double best = std::numeric_limits<double>::infinity();
  for (double beta : candidates) {
    const auto m = gravity_od_matrix(masses, grid, {beta, mass}, observed.total());
    const double e = rmse(observed, m);
    if (e < best) {
      best = e;
      best_beta = beta;
    }
  }
  return best_beta;
}

}  // namespace odflow
