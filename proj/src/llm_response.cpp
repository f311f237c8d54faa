#include "odflow/llm_response.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "odflow/csv.hpp"
#include "odflow/error.hpp"

namespace odflow {
namespace {

constexpr std::string_view kPoisKey = "\"POIs\"";
constexpr std::string_view kCostKey = "\"traveling cost\"";

struct Fields {
  std::vector<std::string> names;
  std::string cost;
};

[[noreturn]] void fail(const std::string& reason, std::string_view raw) {
  throw ParseError(reason, std::string(raw));
}

std::string_view strip_quotes(std::string_view s) {
  s = csv::trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = csv::trim(s.substr(1, s.size() - 2));
  return s;
}

std::vector<std::string> split_names(std::string_view list, std::string_view raw) {
  std::vector<std::string> names;
  if (csv::trim(list).empty()) return names;
  std::size_t start = 0;
  while (true) {
    const auto comma = list.find(',', start);
    const auto item = strip_quotes(list.substr(start, comma == std::string_view::npos ? list.npos : comma - start));
    if (item.empty()) fail("empty POI name in list", raw);
    names.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return names;
}

double parse_cost(std::string_view value, std::string_view raw) {
  auto s = strip_quotes(value);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = strip_quotes(s.substr(1, s.size() - 2));
  if (s.empty()) fail("empty traveling cost", raw);

  std::size_t i = 0;
  if (s[i] == '+' || s[i] == '-') ++i;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
  // from_chars takes a leading '-' but not '+'.
  const auto number = s.substr(s[0] == '+' ? 1 : 0, s[0] == '+' ? i - 1 : i);
  double km = 0.0;
  const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), km);
  if (number.empty() || ec != std::errc{} || ptr != number.data() + number.size()) {
    fail("traveling cost is not a number: '" + std::string(s) + "'", raw);
  }
  if (!std::isfinite(km)) fail("traveling cost is not finite", raw);
  if (km < 0.0) fail("traveling cost is negative", raw);

  const auto unit = fold_case(csv::trim(s.substr(i)));
  if (!unit.empty() && unit != "km" && unit != "kilometer" && unit != "kilometers") {
    fail("unsupported cost unit '" + unit + "'", raw);
  }
  return km == 0.0 ? 0.0 : km;
}

/// Locates `key : value` once in the text; value is a bracketed list or
/// runs to the next comma/brace.
std::optional<std::string_view> find_value(std::string_view text, std::string_view key, bool bracketed,
                                           std::string_view raw) {
  const auto at = text.find(key);
  if (at == std::string_view::npos) return std::nullopt;
  if (text.find(key, at + key.size()) != std::string_view::npos) {
    fail("duplicate field " + std::string(key), raw);
  }
  auto pos = at + key.size();
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos >= text.size() || text[pos] != ':') fail("expected ':' after " + std::string(key), raw);
  ++pos;
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos < text.size() && text[pos] == '[') {
    const auto close = text.find(']', pos + 1);
    if (close == std::string_view::npos) fail("unterminated list after " + std::string(key), raw);
    return text.substr(pos + 1, close - pos - 1);
  }
  if (bracketed) fail("expected '[' after " + std::string(key), raw);
  const auto end = text.find_first_of(",}", pos);
  return text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
}

std::optional<Fields> from_json(std::string_view text, std::string_view raw) {
  const auto j = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;

  Fields f;
  const auto pois = j.find("POIs");
  const auto cost = j.find("traveling cost");
  if (pois == j.end()) fail("missing field \"POIs\"", raw);
  if (cost == j.end()) fail("missing field \"traveling cost\"", raw);

  if (pois->is_array()) {
    for (const auto& e : *pois) {
      if (!e.is_string()) fail("\"POIs\" entries must be strings", raw);
      const auto name = csv::trim(e.get_ref<const std::string&>());
      if (name.empty()) fail("empty POI name in list", raw);
      f.names.emplace_back(name);
    }
  } else if (pois->is_string()) {
    auto s = csv::trim(pois->get_ref<const std::string&>());
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    f.names = split_names(s, raw);
  } else {
    fail("\"POIs\" must be a list", raw);
  }

  auto c = *cost;
  if (c.is_array()) {
    if (c.size() != 1) fail("\"traveling cost\" list must hold one value", raw);
    c = c.front();
  }
  if (c.is_number()) {
    f.cost = c.dump();
  } else if (c.is_string()) {
    f.cost = c.get<std::string>();
  } else {
    fail("\"traveling cost\" must be a number or string", raw);
  }
  return f;
}

Fields from_text(std::string_view text, std::string_view raw) {
  const auto pois = find_value(text, kPoisKey, true, raw);
  const auto cost = find_value(text, kCostKey, false, raw);
  if (!pois) fail("missing field \"POIs\"", raw);
  if (!cost) fail("missing field \"traveling cost\"", raw);
  return {split_names(*pois, raw), std::string(*cost)};
}

}  // namespace

Prediction parse_llm_response(std::string_view text, const Vocabulary& vocab) {
  const auto raw = text;
  try {
    const auto body = csv::trim(text);
    std::optional<Fields> fields;
    if (!body.empty() && body.front() == '{') fields = from_json(body, raw);
    if (!fields) fields = from_text(body, raw);

    Prediction p{std::vector<double>(vocab.size(), 0.0), 0.0};
    for (const auto& name : fields->names) {
      const auto k = vocab.index_of(name);
      if (!k) fail("unknown POI '" + name + "'", raw);
      p.u_hat[*k] = 1.0;
    }
    p.c_hat_km = parse_cost(fields->cost, raw);
    return p;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    fail(e.what(), raw);
  }
}

}  // namespace odflow
