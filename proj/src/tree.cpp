#include "date/tree.hpp"

#include "date/error.hpp"
#include "date/rule_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>

namespace date {

Conjunction to_conjunction(const DecisionPath& path) { return Conjunction(path.predicates); }

double gini(std::span<const std::size_t> class_counts) {
    std::size_t n = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
    if (n == 0) return 0.0;
    double s = 0.0;
    for (auto c : class_counts) {
        double p = static_cast<double>(c) / static_cast<double>(n);
        s += p * p;
    }
    return 1.0 - s;
}

namespace {

// Impurity bookkeeping shared by tree training and candidate ranking.
struct Target {
    Task task;
    std::vector<Value> classes;     // sorted, classification only
    std::vector<std::size_t> label; // class index per row
    std::vector<double> y;          // regression only
};

Target encode_target(const Table& t) {
    Target out{t.schema().task(), {}, {}, {}};
    if (out.task == Task::Classification) {
        for (std::size_t i = 0; i < t.size(); ++i) out.classes.push_back(t.target(i));
        std::sort(out.classes.begin(), out.classes.end(), [](const Value& a, const Value& b) { return a < b; });
        out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
        out.label.reserve(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            auto it = std::lower_bound(out.classes.begin(), out.classes.end(), t.target(i),
                                       [](const Value& a, const Value& b) { return a < b; });
            out.label.push_back(static_cast<std::size_t>(it - out.classes.begin()));
        }
    } else {
        out.y.reserve(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) out.y.push_back(t.target(i).number());
    }
    return out;
}

// Running statistics of one side of a split.
struct Side {
    std::vector<std::size_t> counts;
    double sum = 0.0;
    double sq = 0.0;
    std::size_t n = 0;

    explicit Side(std::size_t k) : counts(k, 0) {}

    void add(const Target& tg, std::size_t row, int sign = 1) {
        if (tg.task == Task::Classification) {
            counts[tg.label[row]] += static_cast<std::size_t>(sign > 0 ? 1 : -1);
        } else {
            double v = tg.y[row];
            sum += sign * v;
            sq += sign * v * v;
        }
        n += static_cast<std::size_t>(sign > 0 ? 1 : -1);
    }

    double impurity(const Task task) const {
        if (n == 0) return 0.0;
        if (task == Task::Classification) return gini(counts);
        double m = sum / static_cast<double>(n);
        return std::max(0.0, sq / static_cast<double>(n) - m * m);
    }
};

double weighted(const Side& l, const Side& r, Task task) {
    double n = static_cast<double>(l.n + r.n);
    return (static_cast<double>(l.n) * l.impurity(task) + static_cast<double>(r.n) * r.impurity(task)) / n;
}

double midpoint(double a, double b) {
    double m = a + (b - a) / 2.0;
    if (!(m < b)) m = a;
    return m;
}

struct Split {
    std::size_t column = 0;
    Predicate left;  // rows that satisfy it go left
    double impurity = 0.0;
};

bool better(const Split& a, const Split& b) {
    if (a.impurity != b.impurity) return a.impurity < b.impurity;
    if (a.left.attribute != b.left.attribute) return a.left.attribute < b.left.attribute;
    return (a.left.constant <=> b.left.constant) == std::partial_ordering::less;
}

// Enumerates every split of `rows` with both children at least `min_side`
// rows; `visit(split, right_side_predicate)` is called per split.
template <class Visit>
void enumerate_splits(const Table& t, const Target& tg, std::span<const std::size_t> rows, std::size_t min_side,
                      Visit&& visit) {
    const auto& schema = t.schema();
    std::size_t k = tg.classes.size();
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (c == schema.target_index()) continue;
        const auto& attr = schema.attribute(c);
        if (attr.kind == Kind::Numeric) {
            std::vector<std::pair<double, std::size_t>> sorted;
            sorted.reserve(rows.size());
            for (auto r : rows) sorted.emplace_back(t.row(r)[c].number(), r);
            std::sort(sorted.begin(), sorted.end());
            Side left(k), right(k);
            for (auto& [v, r] : sorted) right.add(tg, r);
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                left.add(tg, sorted[i].second);
                right.add(tg, sorted[i].second, -1);
                if (sorted[i].first == sorted[i + 1].first) continue;
                if (left.n < min_side || right.n < min_side) continue;
                double thr = midpoint(sorted[i].first, sorted[i + 1].first);
                Split s{c, Predicate{attr.name, Op::Le, Value(thr)}, weighted(left, right, tg.task)};
                visit(s, Predicate{attr.name, Op::Gt, Value(thr)});
            }
        } else {
            std::map<std::string, std::vector<std::size_t>> groups;
            for (auto r : rows) groups[t.row(r)[c].token()].push_back(r);
            if (groups.size() < 2) continue;
            for (auto& [tok, members] : groups) {
                Side left(k), right(k);
                for (auto r : members) left.add(tg, r);
                for (auto& [other, rs] : groups) {
                    if (other == tok) continue;
                    for (auto r : rs) right.add(tg, r);
                }
                if (left.n < min_side || right.n < min_side) continue;
                Split s{c, Predicate{attr.name, Op::Eq, Value(tok)}, weighted(left, right, tg.task)};
                visit(s, Predicate{attr.name, Op::Ne, Value(tok)});
            }
        }
    }
}

class Builder {
public:
    Builder(const Table& t, const TreeHyper& h) : t_(t), h_(h), tg_(encode_target(t)) {}

    std::vector<TreeNode> run() {
        std::vector<std::size_t> all(t_.size());
        std::iota(all.begin(), all.end(), 0);
        grow(all, 0);
        return std::move(nodes_);
    }

private:
    int grow(const std::vector<std::size_t>& rows, int depth) {
        int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Side stats(tg_.classes.size());
        for (auto r : rows) stats.add(tg_, r);
        TreeNode node;
        node.support = rows.size();
        node.impurity = stats.impurity(tg_.task);
        node.prediction = leaf_value(stats);

        bool pure = true;
        for (auto r : rows) {
            bool same = tg_.task == Task::Classification ? tg_.label[r] == tg_.label[rows[0]] : tg_.y[r] == tg_.y[rows[0]];
            if (!same) {
                pure = false;
                break;
            }
        }
        std::optional<Split> best;
        if (!pure && depth < h_.max_depth && rows.size() >= 2 * std::max<std::size_t>(h_.min_leaf, 1)) {
            enumerate_splits(t_, tg_, rows, std::max<std::size_t>(h_.min_leaf, 1), [&](const Split& s, const Predicate&) {
                if (!best || better(s, *best)) best = s;
            });
        }
        if (!best) {
            nodes_[id] = node;
            return id;
        }
        std::vector<std::size_t> left, right;
        for (auto r : rows) (holds(best->left, t_.row(r)[best->column]) ? left : right).push_back(r);
        node.leaf = false;
        node.column = best->column;
        node.split = best->left;
        nodes_[id] = node;
        int l = grow(left, depth + 1);
        int r = grow(right, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    Value leaf_value(const Side& s) const {
        if (tg_.task == Task::Regression) return Value(s.n ? s.sum / static_cast<double>(s.n) : 0.0);
        if (s.n == 0) return tg_.classes.empty() ? Value() : tg_.classes.front();
        auto it = std::max_element(s.counts.begin(), s.counts.end());  // first max = smallest class
        return tg_.classes[static_cast<std::size_t>(it - s.counts.begin())];
    }

    const Table& t_;
    TreeHyper h_;
    Target tg_;
    std::vector<TreeNode> nodes_;
};

std::string content_hash(const nlohmann::json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "m%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json nodes_json(const std::vector<TreeNode>& nodes) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& n : nodes) {
        nlohmann::json j{{"prediction", to_json(n.prediction)}, {"support", n.support}, {"impurity", n.impurity}};
        if (!n.leaf) {
            j["split"] = to_json(n.split);
            j["left"] = n.left;
            j["right"] = n.right;
        }
        arr.push_back(std::move(j));
    }
    return arr;
}

}  // namespace

TreeModel::TreeModel(std::string id, SchemaPtr schema, TreeHyper hyper, std::vector<TreeNode> nodes)
    : id_(std::move(id)), schema_(std::move(schema)), hyper_(hyper), nodes_(std::move(nodes)) {
    if (!schema_) throw ArgumentError("tree model needs a schema");
    if (nodes_.empty()) throw ArgumentError("tree model needs at least one node");
    int n = static_cast<int>(nodes_.size());
    for (auto& node : nodes_) {
        if (node.leaf) continue;
        if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)
            throw ParseError("tree node child index out of range");
        node.column = schema_->require_index(node.split.attribute);
    }
}

int TreeModel::leaf_of(const Record& row) const {
    int cur = 0;
    while (!nodes_[cur].leaf) {
        const auto& n = nodes_[cur];
        cur = holds(n.split, row.at(n.column)) ? n.left : n.right;
    }
    return cur;
}

Value TreeModel::predict(const Record& row) const { return nodes_[leaf_of(row)].prediction; }

DecisionPath TreeModel::path(const Record& row) const {
    DecisionPath p;
    p.path_key = "ROOT";
    int cur = 0;
    bool first = true;
    while (!nodes_[cur].leaf) {
        const auto& n = nodes_[cur];
        if (first) p.path_key += '/';
        first = false;
        if (holds(n.split, row.at(n.column))) {
            p.predicates.push_back(n.split);
            p.path_key += 'L';
            cur = n.left;
        } else {
            p.predicates.push_back(Predicate{n.split.attribute, negate(n.split.op), n.split.constant});
            p.path_key += 'R';
            cur = n.right;
        }
    }
    p.leaf = cur;
    p.leaf_prediction = nodes_[cur].prediction;
    return p;
}

int TreeModel::depth() const {
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes_[i].leaf) {
            d[nodes_[i].left] = d[i] + 1;
            d[nodes_[i].right] = d[i] + 1;
        }
    }
    return best;
}

std::size_t TreeModel::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.leaf; }));
}

nlohmann::json TreeModel::to_json() const {
    return {{"id", id_},
            {"task", to_string(schema_->task())},
            {"target", schema_->target_name()},
            {"hyper", {{"max_depth", hyper_.max_depth}, {"min_leaf", hyper_.min_leaf}, {"seed", hyper_.seed}}},
            {"nodes", nodes_json(nodes_)}};
}

TreeModel TreeModel::from_json(const nlohmann::json& j, SchemaPtr schema) {
    try {
        if (j.at("target").get<std::string>() != schema->target_name())
            throw SchemaError("model target '" + j.at("target").get<std::string>() + "' does not match schema");
        TreeHyper h;
        h.max_depth = j.at("hyper").at("max_depth").get<int>();
        h.min_leaf = j.at("hyper").at("min_leaf").get<std::size_t>();
        h.seed = j.at("hyper").at("seed").get<std::uint64_t>();
        std::vector<TreeNode> nodes;
        for (const auto& jn : j.at("nodes")) {
            TreeNode n;
            n.prediction = value_from_json(jn.at("prediction"));
            n.support = jn.at("support").get<std::size_t>();
            n.impurity = jn.at("impurity").get<double>();
            if (jn.contains("split")) {
                n.leaf = false;
                n.split = predicate_from_json(jn.at("split"));
                n.left = jn.at("left").get<int>();
                n.right = jn.at("right").get<int>();
            }
            nodes.push_back(std::move(n));
        }
        return TreeModel(j.at("id").get<std::string>(), std::move(schema), h, std::move(nodes));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model JSON: ") + e.what());
    }
}

TreeModel train(const Table& t, const TreeHyper& hyper, std::string id) {
    if (t.empty()) throw TrainingError("cannot train a tree on an empty table");
    if (t.size() < 2 * std::max<std::size_t>(hyper.min_leaf, 1))
        throw TrainingError("need at least 2*min_leaf rows to train, got " + std::to_string(t.size()));
    if (hyper.max_depth < 0) throw ArgumentError("max_depth must be non-negative");
    auto nodes = Builder(t, hyper).run();
    if (id.empty()) {
        nlohmann::json j{{"hyper", {hyper.max_depth, hyper.min_leaf, hyper.seed}}, {"nodes", nodes_json(nodes)}};
        id = content_hash(j);
    }
    return TreeModel(std::move(id), t.schema_ptr(), hyper, std::move(nodes));
}

double row_error(const TreeModel& m, const Record& row) {
    Value pred = m.predict(row);
    const Value& y = row.at(m.schema().target_index());
    if (m.task() == Task::Classification) return pred == y ? 0.0 : 1.0;
    return std::abs(pred.number() - y.number());
}

double subset_error(const TreeModel& m, const Table& t) {
    if (t.empty()) throw ArgumentError("error on an empty table is undefined");
    double s = 0.0;
    for (const auto& r : t.rows()) s += row_error(m, r);
    return s / static_cast<double>(t.size());
}

double max_residual(const TreeModel& m, const Table& t) {
    if (t.empty()) throw ArgumentError("error on an empty table is undefined");
    double s = 0.0;
    for (const auto& r : t.rows()) s = std::max(s, row_error(m, r));
    return s;
}

double downstream_error(const TreeModel& m, const Table& t) {
    if (m.task() == Task::Classification) return subset_error(m, t);
    if (t.empty()) throw ArgumentError("error on an empty table is undefined");
    double s = 0.0;
    for (const auto& r : t.rows()) {
        double e = row_error(m, r);
        s += e * e;
    }
    return s / static_cast<double>(t.size());
}

std::vector<ScoredPredicate> scored_split_candidates(const Table& t, std::size_t k) {
    if (t.empty() || k == 0) return {};
    Target tg = encode_target(t);
    std::vector<std::size_t> rows(t.size());
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<ScoredPredicate> out;
    enumerate_splits(t, tg, rows, 1, [&](const Split& s, const Predicate& other) {
        out.push_back({s.left, s.impurity});
        out.push_back({other, s.impurity});
    });
    std::stable_sort(out.begin(), out.end(), [](const ScoredPredicate& a, const ScoredPredicate& b) {
        if (a.impurity != b.impurity) return a.impurity < b.impurity;
        return (a.predicate <=> b.predicate) == std::partial_ordering::less;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

std::vector<Predicate> split_candidates(const Table& t, std::size_t k) {
    std::vector<Predicate> out;
    for (auto& s : scored_split_candidates(t, k)) out.push_back(std::move(s.predicate));
    return out;
}

}  // namespace date
