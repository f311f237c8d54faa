#include "odflow/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "odflow/error.hpp"
#include "odflow/geo.hpp"

namespace odflow {

void MatchPolicy::validate() const {
  if (!std::isfinite(cost_slack) || cost_slack < 0.0) throw ConfigError("cost_slack must be finite and >= 0");
  if (!std::isfinite(cost_tolerance_km) || cost_tolerance_km < 0.0) {
    throw ConfigError("cost_tolerance_km must be finite and >= 0");
  }
}

DestinationMatcher::DestinationMatcher(const Grid& grid, const CityFeatures& features, LossWeights weights,
                                       MatchPolicy policy)
    : grid_(grid), features_(features), weights_(std::move(weights)), policy_(policy) {
  policy_.validate();
  weights_.validate();
  if (features_.cells() != grid_.size()) throw DimensionMismatch("features do not cover the grid");
  if (weights_.w.size() != features_.k()) {
    throw DimensionMismatch(fmt::format("{} loss weights for {} categories", weights_.w.size(), features_.k()));
  }
  if (policy_.poi_only) {
    cell_dist_.reserve(grid_.size() * features_.k());
    for (std::uint32_t i = 0; i < grid_.size(); ++i) {
      const auto f = features_.feature(CellId{i}).as_doubles();
      const auto d = softmax(f);
      cell_dist_.insert(cell_dist_.end(), d.begin(), d.end());
    }
  }
  // Smallest cos(latitude) over cell centers bounds how far east/west a
  // feasible cell can sit.
  const auto& b = grid_.bounds();
  const double top = b.min_lat + (static_cast<double>(grid_.rows()) - 0.5) * grid_.cell_height_deg();
  const double bottom = b.min_lat + 0.5 * grid_.cell_height_deg();
  min_cos_lat_ = std::min(std::cos(geo::deg2rad(top)), std::cos(geo::deg2rad(bottom)));
}

void DestinationMatcher::check(const Prediction& pred) const {
  if (pred.u_hat.size() != features_.k()) {
    throw DimensionMismatch(fmt::format("prediction has {} categories, city {}", pred.u_hat.size(), features_.k()));
  }
  for (double v : pred.u_hat) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("prediction scores must be finite and >= 0");
  }
  if (!std::isfinite(pred.c_hat_km) || pred.c_hat_km < 0.0) {
    throw InvalidArgument("predicted cost must be finite and >= 0");
  }
}

std::vector<double> DestinationMatcher::reference(const Prediction& pred) const {
  if (policy_.poi_only) return softmax(pred.u_hat);
  return normalize(pred.u_hat, pred.c_hat_km).p;
}

bool DestinationMatcher::feasible(CellId origin, CellId candidate, double c_hat_km) const {
  const double limit = c_hat_km * (1.0 + policy_.cost_slack) + policy_.cost_tolerance_km;
  return grid_.travel_cost(origin, candidate) <= limit;
}

double DestinationMatcher::score_with(CellId origin, CellId candidate, const Prediction& pred,
                                      const std::vector<double>& pred_dist) const {
  (void)pred;
  if (policy_.poi_only) {
    const std::span<const double> cand(cell_dist_.data() + static_cast<std::size_t>(candidate.value) * features_.k(),
                                       features_.k());
    return poi_cross_entropy(pred_dist, cand, weights_.w);
  }
  const auto cand = normalize(features_.feature(candidate).as_doubles(), grid_.travel_cost(origin, candidate));
  return combined_cross_entropy(NormalizedTarget{pred_dist}, cand, weights_);
}

double DestinationMatcher::score(CellId origin, CellId candidate, const Prediction& pred) const {
  check(pred);
  return score_with(origin, candidate, pred, reference(pred));
}

CellId DestinationMatcher::match(CellId origin, const Prediction& pred) const {
  check(pred);
  if (!grid_.valid(origin)) throw InvalidCell(fmt::format("origin cell {} out of range", origin.value));
  const auto ref = reference(pred);

  // Bounding window of rows/columns that can hold a feasible cell; cells
  // inside are still tested exactly.
  const double limit = pred.c_hat_km * (1.0 + policy_.cost_slack) + policy_.cost_tolerance_km;
  const double angle = limit / geo::kEarthRadiusKm;
  const auto o_row = static_cast<long>(grid_.row_of(origin));
  const auto o_col = static_cast<long>(grid_.col_of(origin));
  long row_lo = 0, row_hi = static_cast<long>(grid_.rows()) - 1;
  long col_lo = 0, col_hi = static_cast<long>(grid_.cols()) - 1;
  if (angle < std::numbers::pi) {
    const double dlat_deg = angle * 180.0 / std::numbers::pi;
    const auto dr = static_cast<long>(std::ceil(dlat_deg / grid_.cell_height_deg())) + 1;
    row_lo = std::max(row_lo, o_row - dr);
    row_hi = std::min(row_hi, o_row + dr);
    const double s = std::sin(angle / 2.0);
    const double cos_o = std::cos(geo::deg2rad(grid_.cell_center(origin).lat));
    const double ratio = s * s / (cos_o * min_cos_lat_);
    if (ratio < 1.0) {
      const double dlon_deg = 2.0 * std::asin(std::sqrt(ratio)) * 180.0 / std::numbers::pi;
      const auto dc = static_cast<long>(std::ceil(dlon_deg / grid_.cell_width_deg())) + 1;
      col_lo = std::max(col_lo, o_col - dc);
      col_hi = std::min(col_hi, o_col + dc);
    }
  }

  std::optional<CellId> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (long r = row_lo; r <= row_hi; ++r) {
    for (long c = col_lo; c <= col_hi; ++c) {
      const auto cand = grid_.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      if (grid_.travel_cost(origin, cand) > limit) continue;
      const double s = score_with(origin, cand, pred, ref);
      if (!best || s < best_score) {
        best = cand;
        best_score = s;
      }
    }
  }
  // The origin has cost 0 and is always feasible; this is the minimum-cost
  // fallback should that ever fail.
  return best.value_or(origin);
}

CellId match_destination(const Grid& grid, const CityFeatures& features, CellId origin, const Prediction& pred,
                         const LossWeights& weights, const MatchPolicy& policy) {
  return DestinationMatcher(grid, features, weights, policy).match(origin, pred);
}

ODMatrix assemble_od_matrix(const OriginSet& origins, std::span<const CellId> matched, std::size_t n) {
  if (origins.size() != matched.size()) {
    throw DimensionMismatch(fmt::format("{} origins but {} matched destinations", origins.size(), matched.size()));
  }
  ODMatrix m(n);
  for (std::size_t i = 0; i < origins.size(); ++i) m.add(origins[i].origin, matched[i]);
  return m;
}

MatchRun predict_od_matrix(const MatchPipeline& p, const OriginSet& origins) {
  const DestinationMatcher matcher(p.grid, p.features, p.weights, p.policy);
  for (const auto& o : origins) {
    if (!p.grid.valid(o.origin)) throw InvalidCell(fmt::format("origin cell {} out of range", o.origin.value));
  }

  std::vector<PredictQuery> queries;
  queries.reserve(origins.size());
  for (const auto& o : origins) queries.push_back({p.features[o.origin], o.start_time});
  const auto outcomes = p.predictor.predict_all(queries);

  MatchRun run{ODMatrix(p.grid.size()), std::vector<std::optional<CellId>>(origins.size()), {}, 0};
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].ok()) run.failures.push_back({i, outcomes[i].failure, outcomes[i].error});
  }
  if (run.failures.size() > p.error_budget) {
    const auto& first = run.failures.front();
    throw BudgetExceeded(fmt::format("{} of {} origin entries failed (budget {}); first at index {}: {}",
                                     run.failures.size(), origins.size(), p.error_budget, first.index,
                                     first.message));
  }

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(p.threads ? p.threads : hw, std::max<std::size_t>(1, origins.size() / 64));
  std::vector<std::string> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < origins.size(); i += workers) {
        if (outcomes[i].ok()) run.matched[i] = matcher.match(origins[i].origin, *outcomes[i].prediction);
      }
    } catch (const std::exception& e) {
      errors[w] = e.what();
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw InvalidArgument("matching failed: " + e);
  }

  for (std::size_t i = 0; i < origins.size(); ++i) {
    if (run.matched[i]) {
      run.matrix.add(origins[i].origin, *run.matched[i]);
      ++run.processed;
    }
  }
  return run;
}

}  // namespace odflow
