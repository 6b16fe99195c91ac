#pragma once

#include "date/generation.hpp"
#include "date/rules.hpp"
#include "date/tree.hpp"

#include <json.hpp>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace date {

struct MdsConfig {
    std::size_t budget = 200;
    double alpha = 0.8;
    double ucb_c = std::sqrt(2.0);
    /// Phases without a best-score improvement before stopping.
    std::size_t patience = 3;
    std::uint64_t seed = 0;
    /// Global rho, used to normalize regression quality terms.
    double global_rho = 0.05;
    OverlapMode overlap = OverlapMode::Exact;
    TreeHyper hyper;
};

/// 1/2 + sum_{i=2..K} 1/i.
double log_bar(std::size_t k);

/// Cumulative per-arm pull counts n_1..n_{K-1}. Throws ConfigError unless n > K >= 2.
std::vector<std::size_t> sar_schedule(std::size_t k, std::size_t n);

/// rho_k on the utility scale: raw for classification, rho_k / global_rho
/// clipped to [0, 1] for regression.
double normalized_rho(double rho_k, Task task, double global_rho);

/// alpha * (1 - rho) + (1 - alpha) * div, with rho already normalized.
double utility(double rho, double div, double alpha);

struct ErrorBound {
    double value = 1.0;
    /// False when some gap is zero and the bound says nothing.
    bool informative = false;
};

/// 2 K^2 exp(-(n - K) / (2 log_bar(K) S)), S = max_i i |mu_(i)|^-2 over gaps
/// sorted by magnitude; clipped to 1.
ErrorBound error_bound(std::size_t k, std::size_t n, std::span<const double> mu);

/// Successive rejects on Bernoulli arms with the same schedule; returns the
/// surviving arm. Used to sanity-check error_bound.
std::size_t successive_rejects(std::span<const double> means, std::size_t n, std::uint64_t seed);

struct MdsPull {
    std::size_t phase = 0;
    std::size_t arm = 0;
    double delta = 0.0;
    double quality = 0.0;
};

struct MdsPhase {
    std::size_t phase = 0;
    std::size_t pulls_per_arm = 0;
    std::size_t selected = 0;
    double u = 0.0;
    double score = 0.0;  // u plus exploration bonus, used only for the argmax
    double best_before = 0.0;
    bool accepted = false;
};

struct MdsResult {
    /// Arm indices into the input span, in acceptance order.
    std::vector<std::size_t> accepted;
    /// Best score after each phase.
    std::vector<double> best_trace;
    std::vector<std::size_t> schedule;
    std::vector<double> initial_u;
    std::vector<double> initial_div;
    std::vector<MdsPull> pulls;
    std::vector<MdsPhase> phases;
    std::size_t total_pulls = 0;
    /// Fewer than two arms: accepted iff delta > 0, no bandit run.
    bool degenerate = false;
    /// Arms dropped before the run because K >= n.
    std::vector<std::size_t> truncated;
};

/// Diversity of `rule` against the examples of `model_id` plus the accepted arms.
double arm_diversity(const Dgr& rule, const std::string& model_id, std::span<const Example> context,
                     std::span<const ArmCandidate> accepted, OverlapMode mode);

/// Bandit selection over arms. A pull delta-scores an arm's rows on top of train plus the
/// accepted rows, against a bootstrap resample of `val`.
MdsResult run_mds(std::span<const ArmCandidate> arms, std::span<const Example> context, const Table& train,
                  const Table& val, const MdsConfig& cfg);

enum class Selector { Mds, Fgs, Bgs, TopM };
std::string to_string(Selector s);
Selector selector_from_string(const std::string& s);

/// Validation error of a tree trained on train plus the rows of `subset`.
double subset_score(std::span<const ArmCandidate> arms, std::span<const std::size_t> subset, const Table& train,
                    const Table& val, const TreeHyper& hyper);

std::vector<std::size_t> forward_greedy(std::span<const ArmCandidate> arms, const Table& train, const Table& val,
                                        const TreeHyper& hyper);
std::vector<std::size_t> backward_greedy(std::span<const ArmCandidate> arms, const Table& train, const Table& val,
                                         const TreeHyper& hyper);
std::vector<std::size_t> top_m(std::span<const ArmCandidate> arms, const Table& train, const Table& val,
                               const TreeHyper& hyper, std::size_t m = 5);

nlohmann::json to_json(const MdsResult& r);

}  // namespace date
