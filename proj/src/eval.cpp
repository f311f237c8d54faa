#include "odflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include <fmt/format.h>

#include "odflow/error.hpp"

namespace odflow {
namespace {

void check_same(const ODMatrix& a, const ODMatrix& b) {
  if (a.n() != b.n()) throw DimensionMismatch(fmt::format("matrix sizes differ: {} vs {}", a.n(), b.n()));
  if (a.n() == 0) throw DimensionMismatch("empty matrices");
}

/// Visits the union of nonzero entries of two matrices in key order.
void for_each_union(const ODMatrix& a, const ODMatrix& b,
                    const std::function<void(std::uint64_t, std::uint64_t)>& fn) {
  auto ia = a.entries().begin();
  auto ib = b.entries().begin();
  const auto ea = a.entries().end();
  const auto eb = b.entries().end();
  while (ia != ea || ib != eb) {
    if (ib == eb || (ia != ea && ia->first < ib->first)) {
      fn(ia->second, 0);
      ++ia;
    } else if (ia == ea || ib->first < ia->first) {
      fn(0, ib->second);
      ++ib;
    } else {
      fn(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
}

double entry_count(const ODMatrix& m) {
  const auto n = static_cast<double>(m.n());
  return n * n;
}

}  // namespace

double rmse(const ODMatrix& truth, const ODMatrix& pred) {
  check_same(truth, pred);
  double sum = 0.0;
  for_each_union(truth, pred, [&](std::uint64_t f, std::uint64_t g) {
    const double d = static_cast<double>(f) - static_cast<double>(g);
    sum += d * d;
  });
  return std::sqrt(sum / entry_count(truth));
}

double smape(const ODMatrix& truth, const ODMatrix& pred) {
  check_same(truth, pred);
  double sum = 0.0;
  for_each_union(truth, pred, [&](std::uint64_t f, std::uint64_t g) {
    const double a = static_cast<double>(f);
    const double b = static_cast<double>(g);
    if (a + b > 0.0) sum += std::fabs(a - b) / ((a + b) / 2.0);
  });
  return sum / entry_count(truth);
}

double cpc(const ODMatrix& truth, const ODMatrix& pred) {
  check_same(truth, pred);
  const double denom = static_cast<double>(truth.total()) + static_cast<double>(pred.total());
  if (denom == 0.0) throw UndefinedMetric("CPC is undefined for two all-zero matrices");
  double common = 0.0;
  for_each_union(truth, pred,
                 [&](std::uint64_t f, std::uint64_t g) { common += static_cast<double>(std::min(f, g)); });
  return 2.0 * common / denom;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw DimensionMismatch(fmt::format("JSD over vectors of length {} and {}", p.size(), q.size()));
  }
  auto check = [](std::span<const double> v, const char* name) {
    double s = 0.0;
    for (double x : v) {
      if (!std::isfinite(x) || x < 0.0) throw InvalidArgument(fmt::format("{} has a negative or non-finite entry", name));
      s += x;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw InvalidArgument(fmt::format("{} sums to {}, not 1", name, s));
  };
  check(p, "P");
  check(q, "Q");
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_p += p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) kl_q += q[i] * std::log2(q[i] / m);
  }
  // (kl_p + kl_q) is commutative, so jsd(p, q) == jsd(q, p) bit for bit.
  return std::clamp(0.5 * (kl_p + kl_q), 0.0, 1.0);
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["rmse"] = rmse;
  j["smape"] = smape;
  j["smape_percent"] = smape_percent;
  j["cpc"] = cpc;
  j["n"] = n;
  j["entries"] = entries;
  j["truth_total"] = truth_total;
  j["predicted_total"] = predicted_total;
  return j;
}

MetricReport evaluate(const ODMatrix& truth, const ODMatrix& pred) {
  MetricReport r;
  r.rmse = rmse(truth, pred);
  r.smape = smape(truth, pred);
  r.smape_percent = 100.0 * r.smape;
  r.cpc = cpc(truth, pred);
  r.n = truth.n();
  r.entries = static_cast<std::uint64_t>(truth.n()) * truth.n();
  r.truth_total = truth.total();
  r.predicted_total = pred.total();
  return r;
}

BinnedError binned_errors(const ODMatrix& truth, const ODMatrix& pred, const Grid& grid, BinMode mode,
                          std::size_t n_bins) {
  if (n_bins < 1) throw InvalidArgument("n_bins must be at least 1");
  check_same(truth, pred);
  if (truth.n() != grid.size()) throw DimensionMismatch("matrix size differs from the grid");

  const auto n = static_cast<std::uint32_t>(truth.n());
  const std::uint64_t total_entries = static_cast<std::uint64_t>(n) * n;
  std::vector<double> sq(n_bins, 0.0);
  BinnedError out{mode, std::vector<ErrorBin>(n_bins)};

  double lo = 0.0;
  double hi = 0.0;
  auto bin_of = [&](double v) -> std::size_t {
    const double w = (hi - lo) / static_cast<double>(n_bins);
    if (!(w > 0.0)) return 0;
    const auto b = static_cast<std::size_t>(std::floor((v - lo) / w));
    return std::min(b, n_bins - 1);
  };

  if (mode == BinMode::flow) {
    const bool has_zero = truth.entries().size() < total_entries;
    lo = has_zero ? 0.0 : std::numeric_limits<double>::infinity();
    for (const auto& [key, f] : truth.entries()) {
      lo = std::min(lo, static_cast<double>(f));
      hi = std::max(hi, static_cast<double>(f));
    }
    std::uint64_t zero_truth_entries = total_entries;
    for_each_union(truth, pred, [&](std::uint64_t f, std::uint64_t g) {
      if (f == 0) return;  // zero-truth entries handled below
      const auto b = bin_of(static_cast<double>(f));
      const double d = static_cast<double>(f) - static_cast<double>(g);
      sq[b] += d * d;
      ++out.bins[b].count;
      --zero_truth_entries;
    });
    if (zero_truth_entries > 0) {
      const auto b = bin_of(0.0);
      for (const auto& [key, g] : pred.entries()) {
        if (truth.entries().count(key) == 0) sq[b] += static_cast<double>(g) * static_cast<double>(g);
      }
      out.bins[b].count += zero_truth_entries;
    }
  } else {
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < n; ++j) hi = std::max(hi, grid.travel_cost(CellId{i}, CellId{j}));
    }
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < n; ++j) {
        const auto b = bin_of(grid.travel_cost(CellId{i}, CellId{j}));
        const double d = static_cast<double>(truth.at(CellId{i}, CellId{j})) -
                         static_cast<double>(pred.at(CellId{i}, CellId{j}));
        sq[b] += d * d;
        ++out.bins[b].count;
      }
    }
  }

  const double w = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& bin = out.bins[b];
    bin.lo = lo + static_cast<double>(b) * w;
    bin.hi = b + 1 == n_bins ? hi : lo + static_cast<double>(b + 1) * w;
    bin.rmse = bin.count ? std::sqrt(sq[b] / static_cast<double>(bin.count)) : 0.0;
  }
  return out;
}

void write_binned_csv(const BinnedError& binned, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "bin_lo,bin_hi,rmse,count\n";
  for (const auto& b : binned.bins) out << fmt::format("{:.6f},{:.6f},{:.9g},{}\n", b.lo, b.hi, b.rmse, b.count);
}

std::vector<Arc> top_arcs(const ODMatrix& m, const Grid& grid, std::size_t top_k) {
  if (m.n() != grid.size()) throw DimensionMismatch("matrix size differs from the grid");
  std::vector<std::pair<ODMatrix::Key, std::uint64_t>> flows(m.entries().begin(), m.entries().end());
  std::stable_sort(flows.begin(), flows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (flows.size() > top_k) flows.resize(top_k);

  std::vector<Arc> arcs;
  arcs.reserve(flows.size());
  const auto count = static_cast<double>(flows.size());
  for (const auto& [key, flow] : flows) {
    // Tercile by the share of exported arcs with a strictly smaller flow, so
    // equal volumes share a label.
    const auto first_smaller = std::partition_point(flows.begin(), flows.end(),
                                                    [f = flow](const auto& e) { return e.second >= f; });
    const auto smaller = flows.end() - first_smaller;
    const double rank = static_cast<double>(smaller) / count;
    Arc a{grid.cell_center(CellId{key.first}), grid.cell_center(CellId{key.second}), flow, "", ""};
    if (rank < 1.0 / 3.0) {
      a.volume = "low";
      a.color = "blue";
    } else if (rank < 2.0 / 3.0) {
      a.volume = "mid";
      a.color = "red";
    } else {
      a.volume = "high";
      a.color = "yellow";
    }
    arcs.push_back(std::move(a));
  }
  return arcs;
}

void export_arcs(const ODMatrix& m, const Grid& grid, std::size_t top_k, const std::filesystem::path& path) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& a : top_arcs(m, grid, top_k)) {
    nlohmann::ordered_json e;
    e["o_lat"] = a.origin.lat;
    e["o_lon"] = a.origin.lon;
    e["d_lat"] = a.dest.lat;
    e["d_lon"] = a.dest.lon;
    e["flow"] = a.flow;
    e["volume"] = a.volume;
    e["color"] = a.color;
    j.push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace odflow
