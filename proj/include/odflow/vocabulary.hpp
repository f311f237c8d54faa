#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace odflow {

/// Ordered list of POI category names. The position of a name is its index
/// k in every spatial feature vector, so K == size().
class Vocabulary {
 public:
  /// Throws InvalidArgument on empty input, duplicate names (case-insensitive)
  /// or names containing characters reserved by the prompt grammar
  /// (comma, brackets, double quote).
  explicit Vocabulary(std::vector<std::string> names);

  /// The 23 named POI types of the reference taxonomy, most frequent first.
  static Vocabulary standard();

  /// One category per line; blank lines and lines starting with '#' skipped.
  static Vocabulary load(const std::filesystem::path& path);

  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t k) const { return names_.at(k); }
  const std::vector<std::string>& names() const { return names_; }

  /// Case-insensitive lookup, surrounding whitespace ignored.
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Names joined with ", " in vocabulary order.
  std::string joined() const;

 private:
  std::vector<std::string> names_;
  std::vector<std::string> folded_;
};

/// ASCII lower-casing used for all category comparisons.
std::string fold_case(std::string_view s);

}  // namespace odflow
