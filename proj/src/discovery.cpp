#include "date/discovery.hpp"

#include "date/error.hpp"
#include "date/rule_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <unordered_set>

namespace date {

DiscoveryConfig DiscoveryConfig::defaults_for(Task task) {
    DiscoveryConfig cfg;
    cfg.rho = task == Task::Classification ? 0.05 : 10.0;
    return cfg;
}

const PoolModel& DiscoveryResult::model(const std::string& id) const {
    for (const auto& m : models) {
        if (m.model.id() == id) return m;
    }
    throw ArgumentError("unknown model id '" + id + "'");
}

double acceptance_error(const TreeModel& m, const Table& t) {
    return m.task() == Task::Classification ? subset_error(m, t) : max_residual(m, t);
}

double sharing_index(const Table& t_r, std::span<const PoolModel> pool) {
    if (t_r.empty()) return 0.0;
    double best = 0.0;
    for (const auto& pm : pool) {
        std::size_t ok = 0;
        for (const auto& row : t_r.rows()) {
            if (row_error(pm.model, row) <= pm.rho_m) ++ok;
        }
        best = std::max(best, static_cast<double>(ok) / static_cast<double>(t_r.size()));
    }
    return best;
}

std::optional<ShareHit> try_share(const Table& t_r, std::span<const PoolModel> pool) {
    if (t_r.empty()) return std::nullopt;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        double err = acceptance_error(pool[i].model, t_r);
        if (err <= pool[i].rho_m) return ShareHit{i, err};
    }
    return std::nullopt;
}

std::size_t required_fanout(double ind, std::size_t subset_size) {
    double k = std::ceil((1.0 - ind) * static_cast<double>(subset_size) - 1e-9);
    return std::max<std::size_t>(static_cast<std::size_t>(std::max(k, 0.0)), 1);
}

namespace {

struct Entry {
    Conjunction rule;
    double ind = 0.0;
    std::size_t seq = 0;
};

// Top of the queue: highest ind, then fewest predicates, then earliest push.
struct Lower {
    bool operator()(const Entry& a, const Entry& b) const {
        if (a.ind != b.ind) return a.ind < b.ind;
        if (a.rule.size() != b.rule.size()) return a.rule.size() > b.rule.size();
        return a.seq > b.seq;
    }
};

struct Raw {
    std::size_t model = 0;
    double rho = 0.0;
    Conjunction rule;
    std::vector<std::size_t> positions;
    double ind = 0.0;
};

// Fuses same-model examples whose data overlap, as long as the fused example
// still meets its threshold.
std::vector<Example> fuse_overlapping(const Table& train, const std::vector<PoolModel>& pool, std::vector<Raw> raws) {
    std::vector<Example> out;
    for (std::size_t mi = 0; mi < pool.size(); ++mi) {
        struct Group {
            Example ex;
            std::unordered_set<std::size_t> rows;
            std::size_t first;
        };
        std::vector<Group> groups;
        for (std::size_t ri = 0; ri < raws.size(); ++ri) {
            auto& r = raws[ri];
            if (r.model != mi) continue;
            Example e = make_example(pool[mi].model.id(), r.rho, Dgr(r.rule), train.select(r.positions), r.ind);
            bool merged = false;
            for (auto& g : groups) {
                bool overlaps = std::any_of(r.positions.begin(), r.positions.end(),
                                            [&](std::size_t p) { return g.rows.count(p) > 0; });
                if (!overlaps) continue;
                double rho = std::max(g.ex.rho, e.rho);
                Example fused = fuse(generalize(g.ex, rho), generalize(e, rho));
                if (acceptance_error(pool[mi].model, fused.data) > rho) continue;
                g.ex = std::move(fused);
                g.rows.insert(r.positions.begin(), r.positions.end());
                merged = true;
                break;
            }
            if (!merged) {
                Group g{std::move(e), {}, ri};
                g.rows.insert(r.positions.begin(), r.positions.end());
                groups.push_back(std::move(g));
            }
        }
        if (groups.empty()) continue;
        std::size_t rep = 0;
        for (std::size_t g = 1; g < groups.size(); ++g) {
            if (groups[g].ex.ind > groups[rep].ex.ind) rep = g;
        }
        groups[rep].ex.representative = true;
        for (auto& g : groups) out.push_back(std::move(g.ex));
    }
    return out;
}

}  // namespace

DiscoveryResult discover(const Table& train, const DiscoveryConfig& cfg) {
    if (!(cfg.rho > 0.0)) throw ConfigError("rho must be positive");
    if (cfg.max_models < 1) throw ConfigError("max_models must be at least 1");
    const std::size_t min_rows = 2 * std::max<std::size_t>(cfg.hyper.min_leaf, 1);
    if (train.size() < min_rows) throw DiscoveryError("training table too small to fit a single tree");

    auto start = std::chrono::steady_clock::now();
    DiscoveryResult result;
    auto& st = result.stats;
    std::vector<PoolModel> pool;
    std::vector<Raw> raws;
    std::vector<bool> covered(train.size(), false);
    std::unordered_set<std::string> visited;

    std::priority_queue<Entry, std::vector<Entry>, Lower> queue;
    std::size_t seq = 0;
    queue.push({Conjunction(), 0.0, seq++});

    auto emit = [&](std::size_t model, double rho, const Conjunction& rule, std::vector<std::size_t> pos, double ind) {
        for (auto p : pos) covered[p] = true;
        raws.push_back({model, rho, rule, std::move(pos), ind});
    };

    while (!queue.empty() && st.queue_pops < cfg.max_queue) {
        Entry e = queue.top();
        queue.pop();
        if (!visited.insert(to_text(e.rule)).second) continue;
        ++st.queue_pops;

        auto positions = matching_positions(train, Dgr(e.rule));
        if (positions.size() < min_rows) {
            ++st.small_subsets;
            continue;
        }
        if (std::all_of(positions.begin(), positions.end(), [&](std::size_t p) { return covered[p]; })) {
            ++st.covered_skips;
            continue;
        }
        Table t_r = train.select(positions);

        if (cfg.sharing_on) {
            if (auto hit = try_share(t_r, pool)) {
                auto& pm = pool[hit->index];
                if (hit->error > 0.0 && hit->error < pm.rho_m) pm.rho_m = hit->error;
                ++st.shares;
                emit(hit->index, pm.rho_m, e.rule, std::move(positions), sharing_index(t_r, pool));
                continue;
            }
        }

        double ind = sharing_index(t_r, pool);
        if (st.models_trained >= cfg.max_models) {
            spdlog::info("discovery: model budget of {} reached", cfg.max_models);
            break;
        }
        TreeModel m = date::train(t_r, cfg.hyper, "m" + std::to_string(st.models_trained));
        ++st.models_trained;
        double err = acceptance_error(m, t_r);
        if (err <= cfg.rho) {
            // A perfect fit keeps the configured threshold: examples need rho > 0.
            double rho_m = err > 0.0 ? err : cfg.rho;
            pool.push_back({std::move(m), rho_m});
            emit(pool.size() - 1, rho_m, e.rule, std::move(positions), ind);
            continue;
        }
        ++st.rejected_models;

        auto candidates = split_candidates(t_r, std::numeric_limits<std::size_t>::max());
        Expansion ex{e.rule, ind, t_r.size(), required_fanout(ind, t_r.size()), candidates.size(), 0};
        std::size_t k = std::min(ex.required, ex.available);
        for (std::size_t i = 0; i < k; ++i) queue.push({refine(e.rule, candidates[i]), ind, seq++});
        ex.pushed = k;
        result.expansions.push_back(std::move(ex));
    }

    st.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (raws.empty()) {
        throw DiscoveryError("no subset met the error threshold rho=" + format_number(cfg.rho) +
                             " within the search budget; try a looser rho");
    }
    result.examples = fuse_overlapping(train, pool, std::move(raws));
    result.models = std::move(pool);
    spdlog::info("discovery: {} examples, {} models trained, {} shares, {} pops", result.examples.size(),
                 st.models_trained, st.shares, st.queue_pops);
    return result;
}

std::vector<PromptExample> build_prompt_examples(std::span<const Example> examples, std::size_t per_rule,
                                                 std::uint64_t seed) {
    if (per_rule < 1) throw ArgumentError("per_rule must be at least 1");
    std::vector<std::string> order;
    for (const auto& e : examples) {
        if (std::find(order.begin(), order.end(), e.model_id) == order.end()) order.push_back(e.model_id);
    }
    std::vector<PromptExample> out;
    for (const auto& id : order) {
        std::vector<const Example*> group;
        for (const auto& e : examples) {
            if (e.model_id == id) group.push_back(&e);
        }
        std::stable_sort(group.begin(), group.end(), [](const Example* a, const Example* b) {
            if (a->representative != b->representative) return a->representative;
            return a->ind > b->ind;
        });
        for (const auto* e : group) {
            std::size_t n = std::min(per_rule, e->data.size());
            Table rows = n == e->data.size() ? e->data : stratified_sample(e->data, n, seed);
            out.push_back({e->model_id, e->rule, std::move(rows), e->ind, e->representative});
        }
    }
    return out;
}

std::vector<PromptExample> build_prompt_examples(const DiscoveryResult& result, std::size_t per_rule,
                                                 std::uint64_t seed) {
    return build_prompt_examples(result.examples, per_rule, seed);
}

}  // namespace date
