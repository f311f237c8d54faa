#include "odflow/endpoint.hpp"

#include <atomic>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "odflow/dataset.hpp"
#include "odflow/error.hpp"
#include "odflow/llm_response.hpp"

namespace odflow {
namespace {

/// Splits "http://host:port/prefix" into scheme+authority and path prefix.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0) {
    throw ConfigError("endpoint URL must start with http://, got '" + url + "'");
  }
  const auto path = url.find('/', scheme + 3);
  if (path == scheme + 3) throw ConfigError("endpoint URL has no host: '" + url + "'");
  std::string host = url.substr(0, path);
  std::string prefix = path == std::string::npos ? "" : url.substr(path);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {host, prefix};
}

std::atomic<std::uint64_t> g_request_counter{0};

}  // namespace

void EndpointConfig::validate() const {
  if (timeout_ms <= 0) throw ConfigError("endpoint timeout_ms must be positive");
  if (max_in_flight == 0) throw ConfigError("endpoint max_in_flight must be positive");
  if (retries < 0) throw ConfigError("endpoint retries must be non-negative");
  split_url(base_url);
}

EndpointPredictor::EndpointPredictor(EndpointConfig config, Vocabulary vocab, std::string city)
    : config_(std::move(config)), vocab_(std::move(vocab)), city_(std::move(city)) {
  config_.validate();
  instruction_ = render_instruction_text(city_, vocab_);
  std::tie(host_, path_prefix_) = split_url(config_.base_url);
}

Prediction EndpointPredictor::request(const std::string& id, std::span<const std::uint32_t> origin,
                                      Timestamp start) const {
  nlohmann::ordered_json body;
  body["id"] = id;
  body["instruction"] = instruction_;
  body["input"] = render_input(origin, start, vocab_);
  const auto payload = body.dump();

  httplib::Client client(host_);
  const auto sec = config_.timeout_ms / 1000;
  const auto usec = (config_.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    auto res = client.Post(path_prefix_ + "/predict", payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = fmt::format("HTTP status {}", res->status);
      // A rejected request will be rejected again.
      if (res->status >= 400 && res->status < 500 && res->status != 429) break;
      continue;
    }
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("output") || !j["output"].is_string()) {
      throw ParseError("response body is not {\"id\", \"output\"} JSON", res->body);
    }
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>() != id) {
      throw ParseError("response id does not match request id " + id, res->body);
    }
    return parse_llm_response(j["output"].get<std::string>(), vocab_);
  }
  throw TransportError(fmt::format("{}{}/predict failed: {}", host_, path_prefix_, last_error));
}

Prediction EndpointPredictor::predict(std::span<const std::uint32_t> origin, Timestamp start) const {
  return request(fmt::format("q{}", g_request_counter.fetch_add(1)), origin, start);
}

std::vector<PredictOutcome> EndpointPredictor::predict_all(std::span<const PredictQuery> queries) const {
  std::vector<PredictOutcome> out(queries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < queries.size(); i = next.fetch_add(1)) {
      try {
        out[i].prediction = request(fmt::format("trip-{}", i), queries[i].origin, queries[i].start_time);
      } catch (const TransportError& e) {
        out[i] = {std::nullopt, PredictFailure::transport, e.what()};
      } catch (const ParseError& e) {
        out[i] = {std::nullopt, PredictFailure::parse, std::string(e.what()) + ": " + e.raw()};
      } catch (const std::exception& e) {
        out[i] = {std::nullopt, PredictFailure::other, e.what()};
      }
    }
  };
  const auto n_workers = std::min(config_.max_in_flight, std::max<std::size_t>(queries.size(), 1));
  std::vector<std::jthread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  pool.clear();
  return out;
}

}  // namespace odflow
