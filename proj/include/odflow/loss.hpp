#pragma once

#include <span>
#include <vector>

namespace odflow {

/// Softmax-normalized target: entries 0..K-1 are POI categories, entry K is
/// the travel cost.
struct NormalizedTarget {
  std::vector<double> p;

  std::size_t k() const { return p.empty() ? 0 : p.size() - 1; }
  double cost() const { return p.back(); }
};

/// Per-category weights w_k and travel-cost weight alpha for the combined
/// cross-entropy.
struct LossWeights {
  std::vector<double> w;
  double alpha = 1.0;

  static LossWeights unit(std::size_t k, double alpha = 1.0) { return {std::vector<double>(k, 1.0), alpha}; }
  /// Throws InvalidArgument unless every weight is finite and > 0.
  void validate() const;
};

/// Probability floor applied before every logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

/// Max-shifted softmax over the K+1 entries [u_1..u_K, c].
/// Throws InvalidArgument on non-finite input.
NormalizedTarget normalize(std::span<const double> u, double c);

/// Max-shifted softmax over an arbitrary vector.
std::vector<double> softmax(std::span<const double> x);

/// -( sum_k w_k p_k log(w_k q_k) + alpha p_c log(alpha q_c) ), natural log,
/// q floored at kProbabilityFloor. Weights sit inside the logarithm as in
/// the published objective.
double combined_cross_entropy(const NormalizedTarget& truth, const NormalizedTarget& pred,
                              const LossWeights& weights);

/// The POI-only form: -sum_k w_k p_k log(w_k q_k) over K-entry
/// distributions.
double poi_cross_entropy(std::span<const double> truth, std::span<const double> pred,
                         std::span<const double> weights);

}  // namespace odflow
