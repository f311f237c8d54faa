#pragma once

#include <cstddef>
#include <string>

#include "odflow/prediction.hpp"
#include "odflow/vocabulary.hpp"

namespace odflow {

/// Connection settings for a remote predictor speaking the
/// `POST {base_url}/predict` JSON protocol.
struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000";
  int timeout_ms = 30000;
  std::size_t max_in_flight = 4;
  int retries = 2;  ///< extra attempts after a connection error, 5xx or 429

  /// Throws ConfigError on non-positive bounds or a malformed URL.
  void validate() const;
};

/// Environment variable that overrides EndpointConfig::base_url.
inline constexpr const char* kEndpointUrlEnv = "ODFLOW_ENDPOINT_URL";

/// Client for an instruction-tuned model served over HTTP. Each query is
/// rendered with the instruction/input templates, posted with a unique id,
/// and the `output` text is run through parse_llm_response.
class EndpointPredictor final : public Predictor {
 public:
  EndpointPredictor(EndpointConfig config, Vocabulary vocab, std::string city);

  Prediction predict(std::span<const std::uint32_t> origin, Timestamp start) const override;

  /// Runs up to max_in_flight requests concurrently; results in query order.
  std::vector<PredictOutcome> predict_all(std::span<const PredictQuery> queries) const override;

  const EndpointConfig& config() const { return config_; }

 private:
  Prediction request(const std::string& id, std::span<const std::uint32_t> origin, Timestamp start) const;

  EndpointConfig config_;
  Vocabulary vocab_;
  std::string city_;
  std::string instruction_;
  std::string host_;
  std::string path_prefix_;
};

}  // namespace odflow
