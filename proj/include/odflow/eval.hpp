#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "odflow/grid.hpp"
#include "odflow/od_matrix.hpp"

namespace odflow {

// All matrix metrics compare the full N x N entry set, zeros included, and
// throw DimensionMismatch when the matrices differ in N (or N == 0).

/// sqrt( sum (f - f_hat)^2 / N^2 ).
double rmse(const ODMatrix& truth, const ODMatrix& pred);

/// Mean of |f - f_hat| / ((|f| + |f_hat|) / 2) over N^2 entries, 0/0 := 0.
/// A fraction in [0, 2].
double smape(const ODMatrix& truth, const ODMatrix& pred);

/// 2 sum min(f, f_hat) / (sum f + sum f_hat). Throws UndefinedMetric when
/// both matrices are all zero.
double cpc(const ODMatrix& truth, const ODMatrix& pred);

/// Jensen-Shannon divergence, base-2 logs, in [0, 1]. Both inputs must be
/// probability vectors of equal length (sums within 1e-9 of 1).
double jsd(std::span<const double> p, std::span<const double> q);

struct MetricReport {
  double rmse = 0.0;
  double smape = 0.0;
  double smape_percent = 0.0;
  double cpc = 0.0;
  std::size_t n = 0;
  std::uint64_t entries = 0;         ///< N^2
  std::uint64_t truth_total = 0;
  std::uint64_t predicted_total = 0;

  nlohmann::ordered_json to_json() const;
};

MetricReport evaluate(const ODMatrix& truth, const ODMatrix& pred);

enum class BinMode { flow, distance };

struct ErrorBin {
  double lo = 0.0;
  double hi = 0.0;
  double rmse = 0.0;  ///< 0 for empty bins
  std::uint64_t count = 0;
};

struct BinnedError {
  BinMode mode = BinMode::flow;
  std::vector<ErrorBin> bins;
};

/// Splits all N^2 entries into n_bins equal-width bins over the observed
/// range of the ground-truth flow (mode flow) or of the center-to-center
/// distance in km (mode distance), and reports RMSE per bin. The last bin
/// is closed on the right. Throws InvalidArgument when n_bins < 1.
BinnedError binned_errors(const ODMatrix& truth, const ODMatrix& pred, const Grid& grid, BinMode mode,
                          std::size_t n_bins);

/// CSV `bin_lo,bin_hi,rmse,count`.
void write_binned_csv(const BinnedError& binned, const std::filesystem::path& path);

struct Arc {
  LatLon origin;
  LatLon dest;
  std::uint64_t flow = 0;
  std::string volume;  ///< low / mid / high tercile among exported arcs
  std::string color;   ///< blue / red / yellow
};

/// The top_k largest flows, descending (ties by lower origin, then dest).
std::vector<Arc> top_arcs(const ODMatrix& m, const Grid& grid, std::size_t top_k);

/// JSON array of {o_lat, o_lon, d_lat, d_lon, flow, volume, color}.
void export_arcs(const ODMatrix& m, const Grid& grid, std::size_t top_k, const std::filesystem::path& path);

}  // namespace odflow
