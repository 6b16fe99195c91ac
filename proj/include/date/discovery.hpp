#pragma once

#include "date/rules.hpp"
#include "date/table.hpp"
#include "date/tree.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace date {

struct DiscoveryConfig {
    double rho = 0.05;
    std::size_t max_models = 32;
    /// Cap on queue pops.
    std::size_t max_queue = 4096;
    /// Shallower than the downstream tree so the root fit can fail on clean data.
    TreeHyper hyper{6};
    std::uint64_t seed = 0;
    bool sharing_on = true;

    /// rho defaults to 0.05 for classification and 10 for regression.
    static DiscoveryConfig defaults_for(Task task);
};

struct PoolModel {
    TreeModel model;
    double rho_m = 0.0;
};

/// One top-down expansion, kept so the fan-out lower bound can be audited.
struct Expansion {
    Conjunction rule;
    double ind = 0.0;
    std::size_t subset_size = 0;
    std::size_t required = 0;
    std::size_t available = 0;
    std::size_t pushed = 0;
};

struct DiscoveryStats {
    std::size_t models_trained = 0;
    std::size_t shares = 0;
    std::size_t queue_pops = 0;
    std::size_t rejected_models = 0;
    std::size_t small_subsets = 0;
    std::size_t covered_skips = 0;
    double wall_time = 0.0;
};

struct DiscoveryResult {
    std::vector<Example> examples;
    std::vector<PoolModel> models;
    DiscoveryStats stats;
    std::vector<Expansion> expansions;

    const PoolModel& model(const std::string& id) const;
};

/// Classification: error rate. Regression: max residual.
double acceptance_error(const TreeModel& m, const Table& t);

/// max over pool models of the fraction of rows with per-row error <= rho_m.
double sharing_index(const Table& t_r, std::span<const PoolModel> pool);

struct ShareHit {
    std::size_t index = 0;
    double error = 0.0;
};

/// First pool model (insertion order) whose acceptance error on t_r is within its rho_m.
std::optional<ShareHit> try_share(const Table& t_r, std::span<const PoolModel> pool);

/// Fan-out lower bound max(ceil((1 - ind) * n), 1).
std::size_t required_fanout(double ind, std::size_t subset_size);

DiscoveryResult discover(const Table& train, const DiscoveryConfig& cfg);

struct PromptExample {
    std::string model_id;
    Dgr rule;
    Table rows;
    double ind = 0.0;
    bool representative = false;
};

/// Stratified rows per example; models in pool order, representative first.
std::vector<PromptExample> build_prompt_examples(std::span<const Example> examples, std::size_t per_rule,
                                                 std::uint64_t seed);
std::vector<PromptExample> build_prompt_examples(const DiscoveryResult& result, std::size_t per_rule,
                                                 std::uint64_t seed);

}  // namespace date
