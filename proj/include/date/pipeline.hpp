#pragma once

#include "date/backend.hpp"
#include "date/discovery.hpp"
#include "date/generation.hpp"
#include "date/mds.hpp"
#include "date/table.hpp"
#include "date/tree.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace date {

struct RunConfig {
    /// CSV input. Ignored when `fixture` is set.
    std::filesystem::path data;
    /// Built-in dataset name; takes the place of `data`.
    std::string fixture;
    std::string target;
    std::optional<Task> task;
    SplitSpec split;
    /// Unset: 0.05 for classification, 10 for regression.
    std::optional<double> rho;
    DiscoveryConfig discovery;
    GenerationConfig generation;
    MdsConfig mds;
    Selector selector = Selector::Mds;
    std::size_t top_m = 5;
    /// synthetic, llm or replay.
    std::string backend = "synthetic";
    /// Fixture whose ground truth labels synthetic rows; empty means nearest example row.
    std::string oracle;
    /// Transcript directory served by the replay backend.
    std::filesystem::path replay_from;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    TreeHyper downstream;

    /// Sets the top-level seed and every sub-config seed.
    void set_seed(std::uint64_t s);
    /// Fills task and rho from the loaded data and pushes rho into the
    /// discovery and MDS configs.
    void resolve(const Table& data);
};

nlohmann::json to_json(const RunConfig& cfg);
/// Fields missing from `j` keep their value in `base`. Sub-config seeds follow
/// the top-level seed unless given explicitly.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

struct StageTimings {
    double load = 0.0;
    double discover = 0.0;
    double generate = 0.0;
    double select = 0.0;
    double evaluate = 0.0;
};

struct RunReport {
    Task task = Task::Classification;
    /// Misclassification rate or MSE on the test split.
    double baseline_error = 0.0;
    double augmented_error = 0.0;
    /// (baseline - augmented) / baseline * 100; 0 when the baseline is 0.
    double error_reduction_pct = 0.0;
    /// Rows contributed by accepted arms.
    std::size_t syn = 0;
    std::size_t arms = 0;
    std::vector<std::size_t> accepted;
    std::size_t models_trained = 0;
    std::size_t shares = 0;
    std::size_t examples = 0;
    std::string selector;
    std::string backend;
    TreeHyper downstream;
    std::size_t train_rows = 0;
    std::size_t val_rows = 0;
    std::size_t test_rows = 0;
    StageTimings timings;
    /// Set on a report stub written after a stage failed.
    std::string failed_stage;
    std::string error;
};

nlohmann::json to_json(const RunReport& r);

/// Trains a fresh tree on `train` and returns its error on `test`.
double evaluate_downstream(const Table& train, const Table& test, const TreeHyper& hyper);

struct PreparedData {
    Table full;
    SplitResult parts;
};

/// Loads the configured dataset and splits it.
PreparedData prepare_data(const RunConfig& cfg);

std::unique_ptr<GeneratorBackend> make_backend(const RunConfig& cfg, const Table& train,
                                               const std::filesystem::path& transcripts);

struct Selection {
    /// Indices into the arm list, grouped by model in first-appearance order.
    std::vector<std::size_t> accepted;
    /// One MDS trace per model (MDS selector only).
    nlohmann::json trace = nlohmann::json::object();
};

/// Runs the configured selector separately for each model's arms.
Selection select_arms(const RunConfig& cfg, const DiscoveryResult& discovery, const std::vector<ArmCandidate>& arms,
                      const Table& train, const Table& val);

/// train followed by the rows of the accepted arms.
Table assemble(const Table& train, const std::vector<ArmCandidate>& arms, const std::vector<std::size_t>& accepted);

/// Throws Error if any row of `test` reaches discovery, generation or selection inputs.
void check_test_hygiene(const Table& test, const Table& train, const Table& val, const DiscoveryResult& discovery,
                        const std::vector<ArmCandidate>& arms);

/// Final stage: builds T^A, evaluates baseline and augmented trees on test.
RunReport evaluate_run(const RunConfig& cfg, const PreparedData& data, const DiscoveryResult& discovery,
                       const std::vector<ArmCandidate>& arms, const Selection& selection);

/// load, split, discover, generate, select, evaluate. Writes the run directory
/// when cfg.out is set. A failing stage writes a report stub, then rethrows.
RunReport run_pipeline(const RunConfig& cfg);

}  // namespace date
