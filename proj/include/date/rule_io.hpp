#pragma once

#include "date/rules.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace date {

// Plain-text form, used in prompts and logs:
//   (a > 5 AND b <= 3) OR (c = "x")
// The identity rule prints as TRUE. Attribute names that are not plain
// identifiers are wrapped in backticks; tokens are double-quoted.
std::string to_text(const Predicate& p);
std::string to_text(const Conjunction& c);
std::string to_text(const Dgr& r);

/// Parses the plain-text form. Also accepts `&&` / `||`, lowercase keywords,
/// `==`, `≥`, `≤` and a single clause without parentheses. Throws ParseError.
Dgr parse_dgr(std::string_view text);

nlohmann::json to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Predicate& p);
Predicate predicate_from_json(const nlohmann::json& j);
/// {"clauses": [[{"attribute": "a", "op": ">", "value": 5}, ...], ...]}
nlohmann::json to_json(const Dgr& r);
Dgr dgr_from_json(const nlohmann::json& j);

}  // namespace date
