#pragma once

#include "date/table.hpp"

#include <compare>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace date {

/// Comparison operators. The order comparisons cover numeric attributes;
/// `Eq` / `Ne` are the categorical extension (one-vs-rest tree splits need both).
enum class Op { Gt, Ge, Lt, Le, Eq, Ne };

std::string_view op_symbol(Op op);
Op op_from_symbol(std::string_view symbol);
bool is_lower_bound(Op op);
bool is_upper_bound(Op op);
/// The complementary operator: a ≤ c  <->  a > c, a = t  <->  a != t.
Op negate(Op op);

struct Predicate {
    std::string attribute;
    Op op = Op::Gt;
    Value constant;

    bool operator==(const Predicate&) const = default;
    std::partial_ordering operator<=>(const Predicate& other) const;
};

/// Evaluates `cell op constant`.
bool holds(const Predicate& p, const Value& cell);

/// Kind rules: order ops need a numeric attribute, Eq/Ne a categorical one,
/// and the constant's kind must match. Throws SchemaError.
void check_predicate(const Schema& schema, const Predicate& p);

/// AND-clause in canonical form: per attribute at most one lower and one upper
/// bound (the tighter wins), at most one equality; predicates sorted by
/// (attribute, op, constant). Contradictions are kept and flagged.
class Conjunction {
public:
    Conjunction() = default;
    explicit Conjunction(std::vector<Predicate> predicates);

    const std::vector<Predicate>& predicates() const { return preds_; }
    std::size_t size() const { return preds_.size(); }
    bool empty() const { return preds_.empty(); }
    bool satisfiable() const { return satisfiable_; }

    bool operator==(const Conjunction& other) const { return preds_ == other.preds_; }
    std::partial_ordering operator<=>(const Conjunction& other) const;

private:
    std::vector<Predicate> preds_;
    bool satisfiable_ = true;
};

Conjunction canonicalize(const Conjunction& c);

/// r ∧ p, canonicalized. Never throws: contradictions come back unsatisfiable.
Conjunction refine(const Conjunction& r, const Predicate& p);

/// Distribution-guiding rule: a DNF over conjunctions. No clauses means the
/// identity rule, true on every row.
class Dgr {
public:
    Dgr() = default;
    explicit Dgr(std::vector<Conjunction> clauses);
    explicit Dgr(Conjunction clause);

    static Dgr identity() { return Dgr(); }

    const std::vector<Conjunction>& clauses() const { return clauses_; }
    bool is_identity() const { return clauses_.empty(); }
    /// Union of the predicates of all clauses, sorted and deduplicated.
    std::vector<Predicate> predicate_set() const;
    bool mentions(std::string_view attribute) const;

    bool operator==(const Dgr&) const = default;

private:
    std::vector<Conjunction> clauses_;
};

/// r1 ∨ r2 with clause union and canonical ordering.
Dgr disjoin(const Dgr& a, const Dgr& b);

/// Rule bound to a schema: attribute names resolved once, kinds checked.
class CompiledRule {
public:
    CompiledRule(const Schema& schema, const Dgr& rule);
    bool operator()(const Record& row) const;

private:
    struct Term {
        std::size_t column;
        Predicate pred;
    };
    std::vector<std::vector<Term>> clauses_;
    std::vector<bool> satisfiable_;
    bool identity_ = true;
};

bool satisfies(const Schema& schema, const Record& row, const Dgr& rule);
Table filter(const Table& t, const Dgr& rule);
/// Positions of the rows of `t` that satisfy `rule`.
std::vector<std::size_t> matching_positions(const Table& t, const Dgr& rule);

/// Throws SchemaError if the rule names unknown attributes, breaks the kind
/// rules, or constrains the target attribute.
void validate_rule(const Schema& schema, const Dgr& rule);

/// Converts constants to the kinds the schema expects (e.g. a numeric literal
/// on a categorical column becomes a token). Used for externally sourced rules.
Dgr bind_to_schema(const Schema& schema, const Dgr& rule);

/// DGR-based example (m, rho, r, T_r).
struct Example {
    std::string model_id;
    double rho = 0.0;
    Dgr rule;
    Table data;
    /// Sharing index of the rule when it was discovered.
    double ind = 0.0;
    bool representative = false;
};

/// Validates the invariants: rho > 0, data nonempty, every row satisfies the
/// rule, no predicate on the target.
Example make_example(std::string model_id, double rho, Dgr rule, Table data, double ind = 0.0);

/// Inference rule: same model, same threshold -> disjunction of rules over the
/// union of the data (duplicate rows by id removed).
Example fuse(const Example& e1, const Example& e2);

/// Weakens the certified threshold; rho2 must not be below the current one.
Example generalize(const Example& e, double rho2);

enum class OverlapMode {
    /// Jaccard similarity over predicate sets with exact predicate equality.
    Exact,
    /// Soft Jaccard: predicates on the same attribute and bound direction
    /// count partially, decaying with the distance between their constants.
    Interval,
};

double overlap(const Dgr& r1, const Dgr& r2, OverlapMode mode = OverlapMode::Exact);

struct WeightedRule {
    Dgr rule;
    double weight = 0.0;
};

/// Σ_j w_j · overlap(candidate, r_j) with w_j the normalized context weights.
double diversity(const Dgr& candidate, std::span<const WeightedRule> context,
                 OverlapMode mode = OverlapMode::Exact);
/// Context weights are the example data sizes; all must share the candidate's model.
double diversity(const Example& candidate, std::span<const Example> context,
                 OverlapMode mode = OverlapMode::Exact);

}  // namespace date
