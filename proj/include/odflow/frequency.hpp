#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "odflow/dataset.hpp"
#include "odflow/prediction.hpp"

namespace odflow {

/// Set of categories present at an origin, ascending indices.
using OriginSignature = std::vector<std::uint32_t>;

OriginSignature signature_of(std::span<const std::uint32_t> counts);

/// Running mean of destination features and costs.
struct FrequencyRow {
  std::size_t count = 0;
  std::vector<double> mean_destination;
  double mean_cost_km = 0.0;

  friend bool operator==(const FrequencyRow&, const FrequencyRow&) = default;
};

/// Desk-scale stand-in for the fine-tuned language model: memorizes the mean
/// destination feature and cost per (origin signature, hour of day), with an
/// hourly fallback and a global fallback.
class FrequencyTable {
 public:
  static constexpr int kFormatVersion = 1;
  static constexpr std::size_t kHours = 24;

  /// Throws EmptyDataset on no samples, DimensionMismatch on ragged widths.
  static FrequencyTable train(std::span<const OdPoiSample> samples);

  std::size_t k() const { return k_; }

  /// Exact (signature, hour) row, else the hour's row, else the global row.
  Prediction predict(std::span<const std::uint32_t> origin, Timestamp start) const;

  const std::map<std::pair<OriginSignature, int>, FrequencyRow>& rows() const { return rows_; }
  const std::array<FrequencyRow, kHours>& hourly() const { return hourly_; }
  const FrequencyRow& global() const { return global_; }

  nlohmann::json to_json() const;
  static FrequencyTable from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static FrequencyTable load(const std::filesystem::path& path);

  friend bool operator==(const FrequencyTable&, const FrequencyTable&) = default;

 private:
  std::size_t k_ = 0;
  std::map<std::pair<OriginSignature, int>, FrequencyRow> rows_;
  std::array<FrequencyRow, kHours> hourly_{};
  FrequencyRow global_;
};

inline FrequencyTable train_frequency(std::span<const OdPoiSample> samples) {
  return FrequencyTable::train(samples);
}

class FrequencyPredictor final : public Predictor {
 public:
  explicit FrequencyPredictor(FrequencyTable table) : table_(std::move(table)) {}
  Prediction predict(std::span<const std::uint32_t> origin, Timestamp start) const override {
    return table_.predict(origin, start);
  }
  const FrequencyTable& table() const { return table_; }

 private:
  FrequencyTable table_;
};

}  // namespace odflow
