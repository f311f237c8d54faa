#include "odflow/loss.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "odflow/error.hpp"

namespace odflow {

void LossWeights::validate() const {
  for (double x : w) {
    if (!std::isfinite(x) || !(x > 0.0)) throw InvalidArgument(fmt::format("loss weight {} is not positive", x));
  }
  if (!std::isfinite(alpha) || !(alpha > 0.0)) {
    throw InvalidArgument(fmt::format("alpha {} is not positive", alpha));
  }
}

std::vector<double> softmax(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("softmax of an empty vector");
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("softmax input is not finite");
  }
  const double m = *std::max_element(x.begin(), x.end());
  std::vector<double> p(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = std::exp(x[i] - m);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

NormalizedTarget normalize(std::span<const double> u, double c) {
  std::vector<double> x(u.begin(), u.end());
  x.push_back(c);
  return {softmax(x)};
}

double combined_cross_entropy(const NormalizedTarget& truth, const NormalizedTarget& pred,
                              const LossWeights& weights) {
  const auto k = weights.w.size();
  if (truth.p.size() != k + 1 || pred.p.size() != k + 1) {
    throw DimensionMismatch(fmt::format("cross-entropy over {} and {} entries with {} weights",
                                        truth.p.size(), pred.p.size(), k));
  }
  weights.validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double q = std::max(pred.p[i], kProbabilityFloor);
    sum += weights.w[i] * truth.p[i] * std::log(weights.w[i] * q);
  }
  const double qc = std::max(pred.p[k], kProbabilityFloor);
  sum += weights.alpha * truth.p[k] * std::log(weights.alpha * qc);
  return -sum;
}

double poi_cross_entropy(std::span<const double> truth, std::span<const double> pred,
                         std::span<const double> weights) {
  if (truth.size() != pred.size() || truth.size() != weights.size()) {
    throw DimensionMismatch(fmt::format("cross-entropy over {} and {} entries with {} weights",
                                        truth.size(), pred.size(), weights.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw InvalidArgument(fmt::format("loss weight {} is not positive", weights[i]));
    }
    const double q = std::max(pred[i], kProbabilityFloor);
    sum += weights[i] * truth[i] * std::log(weights[i] * q);
  }
  return -sum;
}

}  // namespace odflow
