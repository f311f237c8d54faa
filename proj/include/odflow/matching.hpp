#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odflow/dataset.hpp"
#include "odflow/features.hpp"
#include "odflow/grid.hpp"
#include "odflow/loss.hpp"
#include "odflow/od_matrix.hpp"
#include "odflow/prediction.hpp"

namespace odflow {

/// How a predicted (u_hat, c_hat) is turned into a destination cell.
///
/// Candidates are cells whose travel cost from the origin is at most
/// c_hat * (1 + cost_slack) + cost_tolerance_km. The origin itself always
/// qualifies. Among candidates the lowest cross-entropy wins, ties going to
/// the lowest CellId.
struct MatchPolicy {
  double cost_slack = 0.0;
  /// Absorbs the 3-decimal storage rounding of trip costs (one quantum).
  double cost_tolerance_km = 1e-3;
  /// Compare softmax-normalized POI vectors only (K entries). When false,
  /// each candidate is normalized together with its own travel cost and
  /// compared with the full K+1 combined cross-entropy.
  bool poi_only = true;

  void validate() const;
};

class DestinationMatcher {
 public:
  DestinationMatcher(const Grid& grid, const CityFeatures& features, LossWeights weights, MatchPolicy policy);

  CellId match(CellId origin, const Prediction& pred) const;

  /// Cost constraint test used by match().
  bool feasible(CellId origin, CellId candidate, double c_hat_km) const;

  /// Cross-entropy of a candidate cell against the prediction; lower is
  /// better. The prediction is the reference distribution and the candidate
  /// sits inside the logarithm, so an exact feature match minimizes it.
  double score(CellId origin, CellId candidate, const Prediction& pred) const;

  const Grid& grid() const { return grid_; }
  const MatchPolicy& policy() const { return policy_; }

 private:
  void check(const Prediction& pred) const;
  double score_with(CellId origin, CellId candidate, const Prediction& pred,
                    const std::vector<double>& pred_dist) const;
  std::vector<double> reference(const Prediction& pred) const;

  const Grid& grid_;
  const CityFeatures& features_;
  LossWeights weights_;
  MatchPolicy policy_;
  std::vector<double> cell_dist_;  ///< poi_only: softmax of each cell, N x K
  double min_cos_lat_ = 1.0;
};

CellId match_destination(const Grid& grid, const CityFeatures& features, CellId origin, const Prediction& pred,
                         const LossWeights& weights, const MatchPolicy& policy);

/// f_ij = number of origin entries i matched to j. Throws DimensionMismatch
/// when the lengths differ.
ODMatrix assemble_od_matrix(const OriginSet& origins, std::span<const CellId> matched, std::size_t n);

struct MatchPipeline {
  const Grid& grid;
  const CityFeatures& features;
  const Predictor& predictor;
  LossWeights weights;
  MatchPolicy policy;
  /// Failed origin entries tolerated before the run aborts.
  std::size_t error_budget = 0;
  /// Matching workers; 0 picks the hardware concurrency.
  unsigned threads = 0;
};

struct TripFailure {
  std::size_t index = 0;
  PredictFailure kind = PredictFailure::other;
  std::string message;
};

struct MatchRun {
  ODMatrix matrix;
  std::vector<std::optional<CellId>> matched;  ///< per origin entry, empty on failure
  std::vector<TripFailure> failures;
  std::size_t processed = 0;
};

/// predict -> match -> count over the whole origin set. Throws
/// BudgetExceeded (naming the first failing entry) when failures exceed the
/// error budget.
MatchRun predict_od_matrix(const MatchPipeline& pipeline, const OriginSet& origins);

}  // namespace odflow
