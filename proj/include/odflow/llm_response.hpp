#pragma once

#include <string_view>

#include "odflow/prediction.hpp"
#include "odflow/vocabulary.hpp"

namespace odflow {

/// Turns a model answer into a Prediction.
///
/// Two shapes are accepted, fields in either order:
///   - the bracketed text form
///     `"POIs": [Hotel, Shopping], "traveling cost": [1.3 kilometers]`
///     (optionally wrapped in braces, names optionally quoted);
///   - strict JSON, e.g. `{"POIs": ["Hotel"], "traveling cost": 1.3}`, where
///     the cost may also be a string such as "1.3 kilometers" or a
///     one-element array.
///
/// Names match the vocabulary case-insensitively and become an indicator
/// vector. The cost unit may be omitted or be km / kilometer(s).
///
/// Every failure (unknown name, missing or duplicated field, negative or
/// non-numeric cost, unknown unit) is reported as ParseError carrying the
/// raw text; no other exception type escapes.
Prediction parse_llm_response(std::string_view text, const Vocabulary& vocab);

}  // namespace odflow
