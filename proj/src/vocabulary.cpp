#include "odflow/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"

namespace odflow {

std::string fold_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> names) {
  if (names.empty()) throw InvalidArgument("vocabulary is empty");
  for (auto& raw : names) {
    std::string name(csv::trim(raw));
    if (name.empty()) throw InvalidArgument("vocabulary contains an empty name");
    if (name.find_first_of(",[]\"") != std::string::npos) {
      throw InvalidArgument("vocabulary name '" + name + "' contains a reserved character");
    }
    auto folded = fold_case(name);
    if (std::find(folded_.begin(), folded_.end(), folded) != folded_.end()) {
      throw InvalidArgument("duplicate vocabulary name '" + name + "'");
    }
    names_.push_back(std::move(name));
    folded_.push_back(std::move(folded));
  }
}

Vocabulary Vocabulary::standard() {
  return Vocabulary({
      "Residential Area",
      "Food & Cuisine",
      "Commercial Building",
      "Infrastructure",
      "Tourist Attraction",
      "Organization",
      "Education & School",
      "Hotel",
      "Shopping",
      "Healthcare",
      "Company & Enterprise",
      "Industrial Park",
      "Automobile",
      "Real Estate Community Affiliated",
      "Sports & Fitness",
      "Entertainment & Leisure",
      "Cultural Venue",
      "Life Services",
      "Place Name & Address",
      "Banking & Finance",
      "Indoor & Affiliated Facilities",
      "Other Real Estate Community",
      "Others",
  });
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    auto t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    names.emplace_back(t);
  }
  if (names.empty()) throw InvalidArgument("vocabulary file " + path.string() + " is empty");
  return Vocabulary(std::move(names));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& n : names_) out << n << '\n';
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view name) const {
  const auto folded = fold_case(csv::trim(name));
  const auto it = std::find(folded_.begin(), folded_.end(), folded);
  if (it == folded_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - folded_.begin());
}

std::string Vocabulary::joined() const {
  std::string out;
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (k) out += ", ";
    out += names_[k];
  }
  return out;
}

}  // namespace odflow
