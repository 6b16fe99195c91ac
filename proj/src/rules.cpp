#include "date/rules.hpp"

#include "date/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <unordered_set>

namespace date {

std::string_view op_symbol(Op op) {
    switch (op) {
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Eq: return "=";
    case Op::Ne: return "!=";
    }
    return "?";
}

Op op_from_symbol(std::string_view s) {
    if (s == ">") return Op::Gt;
    if (s == ">=" || s == "≥") return Op::Ge;
    if (s == "<") return Op::Lt;
    if (s == "<=" || s == "≤") return Op::Le;
    if (s == "=" || s == "==") return Op::Eq;
    if (s == "!=" || s == "<>" || s == "≠") return Op::Ne;
    throw ParseError("unknown operator '" + std::string(s) + "'");
}

bool is_lower_bound(Op op) { return op == Op::Gt || op == Op::Ge; }
bool is_upper_bound(Op op) { return op == Op::Lt || op == Op::Le; }

Op negate(Op op) {
    switch (op) {
    case Op::Gt: return Op::Le;
    case Op::Ge: return Op::Lt;
    case Op::Lt: return Op::Ge;
    case Op::Le: return Op::Gt;
    case Op::Eq: return Op::Ne;
    case Op::Ne: return Op::Eq;
    }
    return op;
}

std::partial_ordering Predicate::operator<=>(const Predicate& other) const {
    if (auto c = attribute <=> other.attribute; c != 0) return c;
    if (auto c = op <=> other.op; c != 0) return c;
    return constant <=> other.constant;
}

bool holds(const Predicate& p, const Value& cell) {
    switch (p.op) {
    case Op::Gt: return cell > p.constant;
    case Op::Ge: return cell >= p.constant;
    case Op::Lt: return cell < p.constant;
    case Op::Le: return cell <= p.constant;
    case Op::Eq: return cell == p.constant;
    case Op::Ne: return cell != p.constant;
    }
    return false;
}

void check_predicate(const Schema& schema, const Predicate& p) {
    const auto idx = schema.require_index(p.attribute);
    const auto kind = schema.attribute(idx).kind;
    const bool equality = p.op == Op::Eq || p.op == Op::Ne;
    if (kind == Kind::Numeric && equality) {
        throw SchemaError("operator " + std::string(op_symbol(p.op)) + " is reserved for categorical attributes ('" +
                          p.attribute + "' is numeric)");
    }
    if (kind == Kind::Categorical && !equality) {
        throw SchemaError("order comparison on categorical attribute '" + p.attribute + "'");
    }
    if (p.constant.kind() != kind) {
        throw SchemaError("constant kind does not match attribute '" + p.attribute + "'");
    }
}

// ---------------------------------------------------------------- Conjunction

namespace {

struct AttributeBounds {
    std::optional<Predicate> lower;
    std::optional<Predicate> upper;
    std::set<Value> eq;
    std::set<Value> ne;
};

bool tighter_lower(const Predicate& a, const Predicate& b) {
    if (a.constant != b.constant) return a.constant > b.constant;
    return a.op == Op::Gt && b.op == Op::Ge;
}

bool tighter_upper(const Predicate& a, const Predicate& b) {
    if (a.constant != b.constant) return a.constant < b.constant;
    return a.op == Op::Lt && b.op == Op::Le;
}

}  // namespace

Conjunction::Conjunction(std::vector<Predicate> predicates) {
    std::map<std::string, AttributeBounds> by_attr;
    for (auto& p : predicates) {
        auto& b = by_attr[p.attribute];
        if (is_lower_bound(p.op)) {
            if (!b.lower || tighter_lower(p, *b.lower)) b.lower = p;
        } else if (is_upper_bound(p.op)) {
            if (!b.upper || tighter_upper(p, *b.upper)) b.upper = p;
        } else if (p.op == Op::Eq) {
            b.eq.insert(p.constant);
        } else {
            b.ne.insert(p.constant);
        }
    }
    for (auto& [attr, b] : by_attr) {
        if (b.lower) preds_.push_back(*b.lower);
        if (b.upper) preds_.push_back(*b.upper);
        if (b.lower && b.upper) {
            const auto& lo = b.lower->constant;
            const auto& hi = b.upper->constant;
            if (lo > hi || (lo == hi && (b.lower->op == Op::Gt || b.upper->op == Op::Lt))) satisfiable_ = false;
        }
        if (b.eq.size() > 1) satisfiable_ = false;
        for (const auto& v : b.eq) preds_.push_back({attr, Op::Eq, v});
        for (const auto& v : b.ne) {
            if (b.eq.size() == 1 && !b.eq.contains(v)) continue;  // implied by the equality
            if (b.eq.contains(v)) satisfiable_ = false;
            preds_.push_back({attr, Op::Ne, v});
        }
        if (!b.eq.empty() && (b.lower || b.upper)) {
            for (const auto& v : b.eq) {
                if ((b.lower && !holds(*b.lower, v)) || (b.upper && !holds(*b.upper, v))) satisfiable_ = false;
            }
        }
    }
    std::sort(preds_.begin(), preds_.end(), [](const auto& a, const auto& b) { return a < b; });
}

std::partial_ordering Conjunction::operator<=>(const Conjunction& other) const {
    return std::lexicographical_compare_three_way(preds_.begin(), preds_.end(), other.preds_.begin(),
                                                  other.preds_.end());
}

Conjunction canonicalize(const Conjunction& c) { return Conjunction(c.predicates()); }

Conjunction refine(const Conjunction& r, const Predicate& p) {
    auto preds = r.predicates();
    preds.push_back(p);
    return Conjunction(std::move(preds));
}

// ---------------------------------------------------------------- Dgr

Dgr::Dgr(std::vector<Conjunction> clauses) {
    for (auto& c : clauses) {
        auto canon = canonicalize(c);
        if (canon.empty()) {  // a TRUE clause absorbs the disjunction
            clauses_.clear();
            return;
        }
        clauses_.push_back(std::move(canon));
    }
    std::sort(clauses_.begin(), clauses_.end(), [](const auto& a, const auto& b) { return a < b; });
    clauses_.erase(std::unique(clauses_.begin(), clauses_.end()), clauses_.end());
}

Dgr::Dgr(Conjunction clause) : Dgr(std::vector<Conjunction>{std::move(clause)}) {}

std::vector<Predicate> Dgr::predicate_set() const {
    std::vector<Predicate> out;
    for (const auto& c : clauses_) out.insert(out.end(), c.predicates().begin(), c.predicates().end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a < b; });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool Dgr::mentions(std::string_view attribute) const {
    for (const auto& c : clauses_) {
        for (const auto& p : c.predicates()) {
            if (p.attribute == attribute) return true;
        }
    }
    return false;
}

Dgr disjoin(const Dgr& a, const Dgr& b) {
    if (a.is_identity() || b.is_identity()) return Dgr::identity();
    auto clauses = a.clauses();
    clauses.insert(clauses.end(), b.clauses().begin(), b.clauses().end());
    return Dgr(std::move(clauses));
}

// ---------------------------------------------------------------- evaluation

CompiledRule::CompiledRule(const Schema& schema, const Dgr& rule) : identity_(rule.is_identity()) {
    for (const auto& c : rule.clauses()) {
        std::vector<Term> terms;
        for (const auto& p : c.predicates()) {
            check_predicate(schema, p);
            terms.push_back({schema.require_index(p.attribute), p});
        }
        clauses_.push_back(std::move(terms));
        satisfiable_.push_back(c.satisfiable());
    }
}

bool CompiledRule::operator()(const Record& row) const {
    if (identity_) return true;
    for (std::size_t c = 0; c < clauses_.size(); ++c) {
        if (!satisfiable_[c]) continue;
        bool all = true;
        for (const auto& t : clauses_[c]) {
            if (!holds(t.pred, row[t.column])) {
                all = false;
                break;
            }
        }
        if (all) return true;
    }
    return false;
}

bool satisfies(const Schema& schema, const Record& row, const Dgr& rule) {
    return CompiledRule(schema, rule)(row);
}

std::vector<std::size_t> matching_positions(const Table& t, const Dgr& rule) {
    CompiledRule compiled(t.schema(), rule);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (compiled(t.row(i))) out.push_back(i);
    }
    return out;
}

Table filter(const Table& t, const Dgr& rule) {
    if (rule.is_identity()) return t;
    auto pos = matching_positions(t, rule);
    return t.select(pos);
}

void validate_rule(const Schema& schema, const Dgr& rule) {
    for (const auto& c : rule.clauses()) {
        for (const auto& p : c.predicates()) {
            check_predicate(schema, p);
            if (p.attribute == schema.target_name()) {
                throw SchemaError("rule constrains the target attribute '" + p.attribute + "'");
            }
        }
    }
}

Dgr bind_to_schema(const Schema& schema, const Dgr& rule) {
    std::vector<Conjunction> clauses;
    for (const auto& c : rule.clauses()) {
        std::vector<Predicate> preds;
        for (auto p : c.predicates()) {
            const auto kind = schema.attribute(schema.require_index(p.attribute)).kind;
            if (kind == Kind::Categorical && p.constant.is_numeric()) {
                p.constant = Value(format_number(p.constant.number()));
            } else if (kind == Kind::Numeric && !p.constant.is_numeric()) {
                auto v = parse_number(p.constant.token());
                if (!v) throw SchemaError("non-numeric constant for numeric attribute '" + p.attribute + "'");
                p.constant = Value(*v);
            }
            preds.push_back(std::move(p));
        }
        clauses.emplace_back(std::move(preds));
    }
    Dgr bound(std::move(clauses));
    validate_rule(schema, bound);
    return bound;
}

// ---------------------------------------------------------------- examples

Example make_example(std::string model_id, double rho, Dgr rule, Table data, double ind) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ArgumentError("example threshold must be positive");
    if (data.empty()) throw ArgumentError("example data must be nonempty");
    validate_rule(data.schema(), rule);
    CompiledRule compiled(data.schema(), rule);
    for (const auto& row : data.rows()) {
        if (!compiled(row)) throw ArgumentError("example data contains a row that violates its rule");
    }
    return Example{std::move(model_id), rho, std::move(rule), std::move(data), ind, false};
}

Example fuse(const Example& e1, const Example& e2) {
    if (e1.model_id != e2.model_id) {
        throw FusionError("cannot fuse examples of different models ('" + e1.model_id + "' vs '" + e2.model_id + "')");
    }
    if (e1.rho != e2.rho) throw FusionError("cannot fuse examples with different thresholds; generalize first");
    std::unordered_set<RowId> seen(e1.data.ids().begin(), e1.data.ids().end());
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < e2.data.size(); ++i) {
        if (seen.insert(e2.data.id(i)).second) fresh.push_back(i);
    }
    Table data = union_of(e1.data, e2.data.select(fresh));
    Example out{e1.model_id, e1.rho, disjoin(e1.rule, e2.rule), std::move(data), std::max(e1.ind, e2.ind), false};
    return out;
}

Example generalize(const Example& e, double rho2) {
    if (rho2 < e.rho) throw MonotonicityError("generalize cannot tighten a threshold");
    Example out = e;
    out.rho = rho2;
    return out;
}

// ---------------------------------------------------------------- overlap / diversity

namespace {

double soft_similarity(const Predicate& p, const Predicate& q) {
    if (p == q) return 1.0;
    if (p.attribute != q.attribute) return 0.0;
    const bool same_side = (is_lower_bound(p.op) && is_lower_bound(q.op)) ||
                           (is_upper_bound(p.op) && is_upper_bound(q.op));
    if (!same_side || !p.constant.is_numeric() || !q.constant.is_numeric()) return 0.0;
    const double a = p.constant.number();
    const double b = q.constant.number();
    const double scale = std::max({std::abs(a), std::abs(b), 1e-9});
    return std::exp(-std::abs(a - b) / scale);
}

}  // namespace

double overlap(const Dgr& r1, const Dgr& r2, OverlapMode mode) {
    const auto p1 = r1.predicate_set();
    const auto p2 = r2.predicate_set();
    if (p1.empty() && p2.empty()) return 1.0;
    if (mode == OverlapMode::Exact) {
        std::vector<Predicate> common;
        std::set_intersection(p1.begin(), p1.end(), p2.begin(), p2.end(), std::back_inserter(common),
                              [](const auto& a, const auto& b) { return a < b; });
        const double inter = static_cast<double>(common.size());
        return inter / (static_cast<double>(p1.size() + p2.size()) - inter);
    }
    double forward = 0.0;
    for (const auto& p : p1) {
        double best = 0.0;
        for (const auto& q : p2) best = std::max(best, soft_similarity(p, q));
        forward += best;
    }
    double backward = 0.0;
    for (const auto& q : p2) {
        double best = 0.0;
        for (const auto& p : p1) best = std::max(best, soft_similarity(p, q));
        backward += best;
    }
    const double inter = 0.5 * (forward + backward);
    return inter / (static_cast<double>(p1.size() + p2.size()) - inter);
}

double diversity(const Dgr& candidate, std::span<const WeightedRule> context, OverlapMode mode) {
    if (context.empty()) throw ArgumentError("diversity needs a nonempty context");
    double total = 0.0;
    for (const auto& c : context) total += c.weight;
    double out = 0.0;
    for (const auto& c : context) {
        const double w = total > 0 ? c.weight / total : 1.0 / static_cast<double>(context.size());
        out += w * overlap(candidate, c.rule, mode);
    }
    return std::clamp(out, 0.0, 1.0);
}

double diversity(const Example& candidate, std::span<const Example> context, OverlapMode mode) {
    if (context.empty()) throw ArgumentError("diversity needs a nonempty context");
    std::vector<WeightedRule> weighted;
    for (const auto& e : context) {
        if (e.model_id != candidate.model_id) throw ArgumentError("diversity context mixes models");
        weighted.push_back({e.rule, static_cast<double>(e.data.size())});
    }
    return diversity(candidate.rule, weighted, mode);
}

}  // namespace date
