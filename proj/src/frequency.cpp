#include "odflow/frequency.hpp"

#include <fstream>

#include <fmt/format.h>

#include "odflow/error.hpp"

namespace odflow {
namespace {

constexpr const char* kFormatName = "odflow.frequency_table";

void accumulate(FrequencyRow& row, const OdPoiSample& s) {
  if (row.mean_destination.empty()) row.mean_destination.assign(s.destination.k(), 0.0);
  for (std::size_t k = 0; k < s.destination.k(); ++k) row.mean_destination[k] += s.destination.counts[k];
  row.mean_cost_km += s.cost_km;
  ++row.count;
}

void finish(FrequencyRow& row) {
  if (row.count == 0) return;
  const auto n = static_cast<double>(row.count);
  for (auto& v : row.mean_destination) v /= n;
  row.mean_cost_km /= n;
}

Prediction to_prediction(const FrequencyRow& row) { return {row.mean_destination, row.mean_cost_km}; }

nlohmann::json row_json(const FrequencyRow& row) {
  return {{"count", row.count}, {"destination", row.mean_destination}, {"cost_km", row.mean_cost_km}};
}

FrequencyRow row_from(const nlohmann::json& j, std::size_t k) {
  FrequencyRow row;
  row.count = j.at("count").get<std::size_t>();
  row.mean_destination = j.at("destination").get<std::vector<double>>();
  row.mean_cost_km = j.at("cost_km").get<double>();
  if (row.count > 0 && row.mean_destination.size() != k) {
    throw ConfigError("frequency table row has the wrong width");
  }
  return row;
}

}  // namespace

OriginSignature signature_of(std::span<const std::uint32_t> counts) {
  OriginSignature sig;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] != 0) sig.push_back(static_cast<std::uint32_t>(k));
  }
  return sig;
}

FrequencyTable FrequencyTable::train(std::span<const OdPoiSample> samples) {
  if (samples.empty()) throw EmptyDataset("cannot train a frequency table on zero samples");
  FrequencyTable t;
  t.k_ = samples.front().origin.k();
  for (const auto& s : samples) {
    if (s.origin.k() != t.k_ || s.destination.k() != t.k_) {
      throw DimensionMismatch("training samples have inconsistent feature widths");
    }
    const int hour = s.start_time.hour();
    accumulate(t.rows_[{signature_of(s.origin.counts), hour}], s);
    accumulate(t.hourly_[static_cast<std::size_t>(hour)], s);
    accumulate(t.global_, s);
  }
  for (auto& [key, row] : t.rows_) finish(row);
  for (auto& row : t.hourly_) finish(row);
  finish(t.global_);
  return t;
}

Prediction FrequencyTable::predict(std::span<const std::uint32_t> origin, Timestamp start) const {
  if (origin.size() != k_) {
    throw DimensionMismatch(fmt::format("query has {} categories, table {}", origin.size(), k_));
  }
  const int hour = start.hour();
  if (auto it = rows_.find({signature_of(origin), hour}); it != rows_.end()) {
    return to_prediction(it->second);
  }
  if (const auto& h = hourly_[static_cast<std::size_t>(hour)]; h.count > 0) return to_prediction(h);
  return to_prediction(global_);
}

nlohmann::json FrequencyTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, row] : rows_) {
    auto r = row_json(row);
    r["signature"] = key.first;
    r["hour"] = key.second;
    rows.push_back(std::move(r));
  }
  nlohmann::json hourly = nlohmann::json::array();
  for (const auto& row : hourly_) hourly.push_back(row_json(row));
  return {{"format", kFormatName}, {"version", kFormatVersion}, {"k", k_},
          {"global", row_json(global_)}, {"hourly", hourly}, {"rows", rows}};
}

FrequencyTable FrequencyTable::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormatName) throw ConfigError("not a frequency table");
    if (j.at("version").get<int>() != kFormatVersion) {
      throw ConfigError(fmt::format("unsupported frequency table version {}", j.at("version").dump()));
    }
    FrequencyTable t;
    t.k_ = j.at("k").get<std::size_t>();
    t.global_ = row_from(j.at("global"), t.k_);
    const auto& hourly = j.at("hourly");
    if (hourly.size() != kHours) throw ConfigError("frequency table needs 24 hourly rows");
    for (std::size_t h = 0; h < kHours; ++h) t.hourly_[h] = row_from(hourly[h], t.k_);
    for (const auto& r : j.at("rows")) {
      t.rows_[{r.at("signature").get<OriginSignature>(), r.at("hour").get<int>()}] = row_from(r, t.k_);
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed frequency table: ") + e.what());
  }
}

void FrequencyTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

FrequencyTable FrequencyTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace odflow
