#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "odflow/grid.hpp"

namespace odflow {

/// N x N origin-destination flow counts, stored sparsely. Only nonzero
/// entries are kept, so equality is elementwise equality.
class ODMatrix {
 public:
  using Key = std::pair<std::uint32_t, std::uint32_t>;

  explicit ODMatrix(std::size_t n = 0) : n_(n) {}

  std::size_t n() const { return n_; }
  std::uint64_t at(CellId origin, CellId dest) const;
  void add(CellId origin, CellId dest, std::uint64_t count = 1);

  std::uint64_t total() const { return total_; }
  /// Nonzero entries ordered by (origin, destination).
  const std::map<Key, std::uint64_t>& entries() const { return entries_; }

  /// CSV triples `origin_cell,dest_cell,flow`, nonzero entries only.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  /// n is the matrix dimension; entries outside it are rejected.
  static ODMatrix read_csv(const std::filesystem::path& path, std::size_t n);

  friend bool operator==(const ODMatrix&, const ODMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::uint64_t total_ = 0;
  std::map<Key, std::uint64_t> entries_;
};

/// Stable digest of a grid's defining parameters.
std::string grid_digest(const Grid& grid);

/// JSON sidecar describing a serialized matrix: dimension, grid digest and
/// the digest of the configuration that produced it.
void write_od_sidecar(const std::filesystem::path& path, const ODMatrix& m, const Grid& grid,
                      const std::string& config_digest);

}  // namespace odflow
