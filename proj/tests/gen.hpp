#pragma once

// Random tables and rules for property tests.

#include "date/rules.hpp"
#include "date/table.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace gen {

using Rng = std::mt19937_64;

inline std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

/// Numeric columns a0.., categorical columns c0.., target y. Numeric values
/// are drawn from a small grid so ties and repeated constants occur.
inline date::Table table(Rng& rng, std::size_t rows, std::size_t numeric, std::size_t categorical,
                         date::Task task = date::Task::Classification, std::size_t classes = 2) {
    std::vector<date::Attribute> attrs;
    for (std::size_t i = 0; i < numeric; ++i) attrs.push_back({"a" + std::to_string(i), date::Kind::Numeric});
    for (std::size_t i = 0; i < categorical; ++i) attrs.push_back({"c" + std::to_string(i), date::Kind::Categorical});
    attrs.push_back({"y", task == date::Task::Classification ? date::Kind::Categorical : date::Kind::Numeric});
    auto schema = std::make_shared<const date::Schema>(attrs, "y", task);
    std::vector<date::Record> data;
    for (std::size_t r = 0; r < rows; ++r) {
        date::Record rec;
        for (std::size_t i = 0; i < numeric; ++i) rec.push_back(static_cast<double>(pick(rng, 20)) / 2.0);
        for (std::size_t i = 0; i < categorical; ++i) rec.push_back(std::string(1, static_cast<char>('p' + pick(rng, 3))));
        if (task == date::Task::Classification) {
            rec.push_back("k" + std::to_string(pick(rng, classes)));
        } else {
            rec.push_back(static_cast<double>(pick(rng, 50)) / 4.0);
        }
        data.push_back(std::move(rec));
    }
    return date::Table(schema, std::move(data), date::Provenance::Original);
}

/// A predicate whose constant comes from the table (or an off-grid value).
inline date::Predicate predicate(Rng& rng, const date::Table& t) {
    const auto& s = t.schema();
    std::size_t col;
    do {
        col = pick(rng, s.size());
    } while (col == s.target_index());
    const auto& attr = s.attribute(col);
    if (attr.kind == date::Kind::Numeric) {
        static const date::Op ops[] = {date::Op::Gt, date::Op::Ge, date::Op::Lt, date::Op::Le};
        double c = t.empty() || pick(rng, 5) == 0 ? static_cast<double>(pick(rng, 21)) / 2.0 - 0.25
                                                   : t.row(pick(rng, t.size()))[col].number();
        return {attr.name, ops[pick(rng, 4)], c};
    }
    std::string tok(1, static_cast<char>('p' + pick(rng, 3)));
    return {attr.name, pick(rng, 2) ? date::Op::Eq : date::Op::Ne, tok};
}

inline date::Conjunction conjunction(Rng& rng, const date::Table& t, std::size_t max_len = 3) {
    std::vector<date::Predicate> ps;
    std::size_t n = 1 + pick(rng, max_len);
    for (std::size_t i = 0; i < n; ++i) ps.push_back(predicate(rng, t));
    return date::Conjunction(ps);
}

inline date::Dgr dgr(Rng& rng, const date::Table& t, std::size_t max_clauses = 3) {
    std::vector<date::Conjunction> cs;
    std::size_t n = 1 + pick(rng, max_clauses);
    for (std::size_t i = 0; i < n; ++i) cs.push_back(conjunction(rng, t));
    return date::Dgr(cs);
}

/// A small random table whose shape is itself random.
inline date::Table any_table(Rng& rng) {
    return table(rng, 5 + pick(rng, 60), 1 + pick(rng, 3), pick(rng, 3));
}

}  // namespace gen
