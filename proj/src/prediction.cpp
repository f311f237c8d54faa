#include "odflow/prediction.hpp"

#include "odflow/error.hpp"

namespace odflow {

std::vector<PredictOutcome> Predictor::predict_all(std::span<const PredictQuery> queries) const {
  std::vector<PredictOutcome> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    try {
      out[i].prediction = predict(queries[i].origin, queries[i].start_time);
    } catch (const TransportError& e) {
      out[i] = {std::nullopt, PredictFailure::transport, e.what()};
    } catch (const ParseError& e) {
      out[i] = {std::nullopt, PredictFailure::parse, e.what()};
    } catch (const Error& e) {
      out[i] = {std::nullopt, PredictFailure::other, e.what()};
    }
  }
  return out;
}

}  // namespace odflow
