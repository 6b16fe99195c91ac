#pragma once

#include "date/rules.hpp"
#include "date/table.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace date {

struct TreeHyper {
    int max_depth = 8;
    std::size_t min_leaf = 2;
    std::uint64_t seed = 0;

    bool operator==(const TreeHyper&) const = default;
};

/// Internal nodes send a row left when `row[column] op threshold` holds, where
/// op is `<=` for numeric columns and `=` for categorical ones.
struct TreeNode {
    bool leaf = true;
    std::size_t column = 0;
    Predicate split;
    int left = -1;
    int right = -1;
    Value prediction;
    std::size_t support = 0;
    double impurity = 0.0;

    bool operator==(const TreeNode&) const = default;
};

struct DecisionPath {
    std::vector<Predicate> predicates;
    Value leaf_prediction;
    std::string path_key;
    int leaf = 0;
};

/// Folds a path into the conjunction that selects its leaf.
Conjunction to_conjunction(const DecisionPath& path);

class TreeModel {
public:
    TreeModel(std::string id, SchemaPtr schema, TreeHyper hyper, std::vector<TreeNode> nodes);

    const std::string& id() const { return id_; }
    const Schema& schema() const { return *schema_; }
    const SchemaPtr& schema_ptr() const { return schema_; }
    Task task() const { return schema_->task(); }
    const TreeHyper& hyper() const { return hyper_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }

    int depth() const;
    std::size_t leaf_count() const;
    int leaf_of(const Record& row) const;
    Value predict(const Record& row) const;
    DecisionPath path(const Record& row) const;

    nlohmann::json to_json() const;
    static TreeModel from_json(const nlohmann::json& j, SchemaPtr schema);

    bool operator==(const TreeModel& other) const {
        return id_ == other.id_ && hyper_ == other.hyper_ && nodes_ == other.nodes_;
    }

private:
    std::string id_;
    SchemaPtr schema_;
    TreeHyper hyper_;
    std::vector<TreeNode> nodes_;
};

/// CART: Gini for classification, child variance for regression, thresholds
/// at midpoints of consecutive observed values. An empty `id` is replaced by
/// a content hash so identical trainings yield identical ids.
TreeModel train(const Table& t, const TreeHyper& hyper, std::string id = {});

inline Value predict(const TreeModel& m, const Record& row) { return m.predict(row); }
inline DecisionPath path(const TreeModel& m, const Record& row) { return m.path(row); }

/// 0/1 loss for classification, |m(t) - y| for regression.
double row_error(const TreeModel& m, const Record& row);
/// Misclassification rate or mean absolute deviation.
double subset_error(const TreeModel& m, const Table& t);
/// Maximum per-row error (0/1 loss maximum for classification).
double max_residual(const TreeModel& m, const Table& t);
/// Misclassification rate or mean squared error.
double downstream_error(const TreeModel& m, const Table& t);

double gini(std::span<const std::size_t> class_counts);

struct ScoredPredicate {
    Predicate predicate;
    double impurity = 0.0;
};

/// The k best single-split predicates by weighted child impurity. Every split
/// contributes both sides (a <= c and a > c, or a = t and a != t).
std::vector<ScoredPredicate> scored_split_candidates(const Table& t, std::size_t k);
std::vector<Predicate> split_candidates(const Table& t, std::size_t k);

}  // namespace date
