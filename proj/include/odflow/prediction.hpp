#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odflow/timestamp.hpp"

namespace odflow {

/// Predicted destination POI scores and acceptable travel cost for one
/// origin entry.
struct Prediction {
  std::vector<double> u_hat;
  double c_hat_km = 0.0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct PredictQuery {
  std::span<const std::uint32_t> origin;
  Timestamp start_time;
};

enum class PredictFailure { none, transport, parse, other };

struct PredictOutcome {
  std::optional<Prediction> prediction;
  PredictFailure failure = PredictFailure::none;
  std::string error;

  bool ok() const { return prediction.has_value(); }
};

/// (u_hat, c_hat) = f(u_origin, t; theta).
class Predictor {
 public:
  virtual ~Predictor() = default;

  /// Throws on failure (TransportError, ParseError, ...).
  virtual Prediction predict(std::span<const std::uint32_t> origin, Timestamp start) const = 0;

  /// Answers every query, capturing per-query failures instead of throwing.
  /// Results are in query order. The default runs predict() sequentially.
  virtual std::vector<PredictOutcome> predict_all(std::span<const PredictQuery> queries) const;
};

}  // namespace odflow
