#include "odflow/od_matrix.hpp"

#include <charconv>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "odflow/csv.hpp"
#include "odflow/digest.hpp"
#include "odflow/error.hpp"

namespace odflow {

std::uint64_t ODMatrix::at(CellId origin, CellId dest) const {
  const auto it = entries_.find({origin.value, dest.value});
  return it == entries_.end() ? 0 : it->second;
}

void ODMatrix::add(CellId origin, CellId dest, std::uint64_t count) {
  if (origin.value >= n_ || dest.value >= n_) {
    throw InvalidCell(fmt::format("OD entry ({}, {}) outside a {}-cell matrix", origin.value, dest.value, n_));
  }
  if (count == 0) return;
  entries_[{origin.value, dest.value}] += count;
  total_ += count;
}

std::string ODMatrix::to_csv() const {
  std::string out = "origin_cell,dest_cell,flow\n";
  for (const auto& [key, flow] : entries_) out += fmt::format("{},{},{}\n", key.first, key.second, flow);
  return out;
}

void ODMatrix::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv();
  if (!out) throw IoError("write failed for " + path.string());
}

ODMatrix ODMatrix::read_csv(const std::filesystem::path& path, std::size_t n) {
  csv::Reader reader(path);
  const auto o = reader.require_column("origin_cell");
  const auto d = reader.require_column("dest_cell");
  const auto f = reader.require_column("flow");
  ODMatrix m(n);
  std::vector<std::string> fields;
  auto parse = [&](const std::string& s, std::uint64_t& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      throw IoError(fmt::format("{}:{}: bad integer '{}'", path.string(), reader.line_number(), s));
    }
  };
  while (reader.next(fields)) {
    if (fields.size() < std::max({o, d, f}) + 1) {
      throw IoError(fmt::format("{}:{}: too few fields", path.string(), reader.line_number()));
    }
    std::uint64_t oi = 0, di = 0, flow = 0;
    parse(fields[o], oi);
    parse(fields[d], di);
    parse(fields[f], flow);
    if (oi >= n || di >= n) {
      throw DimensionMismatch(fmt::format("{}:{}: cell outside a {}-cell matrix", path.string(),
                                          reader.line_number(), n));
    }
    m.add(CellId{static_cast<std::uint32_t>(oi)}, CellId{static_cast<std::uint32_t>(di)}, flow);
  }
  return m;
}

std::string grid_digest(const Grid& grid) {
  const auto& b = grid.bounds();
  return sha256_hex(fmt::format("grid:{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}", b.min_lat, b.max_lat,
                                b.min_lon, b.max_lon, grid.cell_size_m(), grid.rows(), grid.cols()));
}

void write_od_sidecar(const std::filesystem::path& path, const ODMatrix& m, const Grid& grid,
                      const std::string& config_digest) {
  nlohmann::ordered_json j;
  j["n"] = m.n();
  j["rows"] = grid.rows();
  j["cols"] = grid.cols();
  j["grid_hash"] = grid_digest(grid);
  j["config_digest"] = config_digest;
  j["total_flow"] = m.total();
  j["nonzero_entries"] = m.entries().size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace odflow
