#pragma once

#include "date/backend.hpp"
#include "date/discovery.hpp"
#include "date/prompt.hpp"
#include "date/tree.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace date {

struct GenerationConfig {
    std::size_t iterations = 3;
    /// Rows requested per generate call.
    std::size_t per_call = 40;
    /// Sample rows shown per rule in a prompt.
    std::size_t per_rule = 5;
    std::size_t max_refined = 3;
    /// Fraction of T_m held out for scoring Delta.
    double holdout = 0.2;
    std::uint64_t seed = 0;
    /// Decision-tree path grouping; off means one group per generate call.
    bool dt_reasoning_on = true;
    /// Rule refinement round after each iteration.
    bool dgr_opt_on = true;
    PromptConfig prompt;
};

struct ArmCandidate {
    std::string model_id;
    /// Threshold of the model the rows were filtered against.
    double rho_m = 0.0;
    /// rho_m - delta.
    double rho_k = 0.0;
    Dgr rule;
    Table data;
    double delta = 0.0;
    /// Same score measured in-sample on all of T_m.
    double delta_in_sample = 0.0;
    std::size_t iteration = 0;
    /// Creation order across the whole run.
    std::size_t index = 0;
};

struct PathGroup {
    std::string path_key;
    Dgr rule;
    Table data;
};

/// Groups rows by the leaf path they follow through m, ordered by path key.
std::vector<PathGroup> group_by_path(const TreeModel& m, const Table& rows);

/// Every row's error (0/1 loss or absolute residual) is within rho_m.
bool quality_filter(const TreeModel& m, const Table& h, double rho_m);

/// error(tree(t_train), t_val) - error(tree(t_train ∪ h), t_val), both trees
/// trained with the same hyperparameters. Positive means h helps.
double delta_score(const TreeHyper& hyper, const Table& t_train, const Table& t_val, const Table& h);

struct GenerationStats {
    std::size_t generate_calls = 0;
    std::size_t refine_calls = 0;
    std::size_t rows_returned = 0;
    std::size_t rows_off_rule = 0;
    std::size_t duplicates_dropped = 0;
    std::size_t groups_filtered = 0;
    std::size_t failed_calls = 0;
};

struct GenerationResult {
    std::vector<ArmCandidate> candidates;
    GenerationStats stats;
};

GenerationResult run_generation(const DiscoveryResult& discovery, const Table& train, const GenerationConfig& cfg,
                                GeneratorBackend& backend);

nlohmann::json to_json(const ArmCandidate& c);
ArmCandidate arm_from_json(const nlohmann::json& j, const SchemaPtr& schema);

}  // namespace date
