#include "date/error.hpp"
#include "date/fixtures.hpp"
#include "date/mds.hpp"
#include "date/pipeline.hpp"
#include "date/run_store.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <sstream>

namespace {

struct Flags {
    std::string config, data, target, task, backend, selector, out, fixture, oracle, replay_from;
    double rho = 0, alpha = 0;
    std::size_t iters = 0, budget = 0;
    std::uint64_t seed = 0;
};

void add_run_flags(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON config file; flags override it");
    app->add_option("--data", f.data, "CSV dataset");
    app->add_option("--fixture", f.fixture, "built-in dataset instead of --data");
    app->add_option("--target", f.target, "target column");
    app->add_option("--task", f.task, "classification or regression")
        ->check(CLI::IsMember({"classification", "regression"}));
    app->add_option("--rho", f.rho, "error threshold (default 0.05 classification, 10 regression)");
    app->add_option("--iters", f.iters, "generation iterations (default 3)");
    app->add_option("--alpha", f.alpha, "quality weight in the MDS utility (default 0.8)");
    app->add_option("--budget", f.budget, "MDS pull budget (default 200)");
    app->add_option("--backend", f.backend, "llm, synthetic or replay")
        ->check(CLI::IsMember({"llm", "synthetic", "replay"}));
    app->add_option("--selector", f.selector, "mds, fgs, bgs or topm")
        ->check(CLI::IsMember({"mds", "fgs", "bgs", "topm"}));
    app->add_option("--oracle", f.oracle, "fixture whose ground truth labels synthetic rows");
    app->add_option("--replay-from", f.replay_from, "transcript directory for --backend replay");
    app->add_option("--seed", f.seed, "seed for every stage");
}

// Only flags that were given end up in the override document.
nlohmann::json overrides(const CLI::App* app, const Flags& f) {
    nlohmann::json j = nlohmann::json::object();
    auto given = [&](const char* name) { return app->count(name) > 0; };
    if (given("--seed")) j["seed"] = f.seed;
    if (given("--data")) j["data"] = f.data;
    if (given("--fixture")) j["fixture"] = f.fixture;
    if (given("--target")) j["target"] = f.target;
    if (given("--task")) j["task"] = f.task;
    if (given("--rho")) j["rho"] = f.rho;
    if (given("--iters")) j["iters"] = f.iters;
    if (given("--alpha")) j["alpha"] = f.alpha;
    if (given("--budget")) j["budget"] = f.budget;
    if (given("--backend")) j["backend"] = f.backend;
    if (given("--selector")) j["selector"] = f.selector;
    if (given("--oracle")) j["oracle"] = f.oracle;
    if (given("--replay-from")) j["replay_from"] = f.replay_from;
    if (given("--out")) j["out"] = f.out;
    return j;
}

date::RunConfig resolve_config(const CLI::App* app, const Flags& f, date::RunConfig base = {}) {
    if (!f.config.empty()) base = date::config_from_json(date::read_json(f.config), base);
    return date::config_from_json(overrides(app, f), base);
}

// Stage commands reload the prior run's config and data split.
struct PriorRun {
    date::RunConfig cfg;
    date::PreparedData data;
};

PriorRun load_prior(const CLI::App* app, const Flags& f) {
    std::filesystem::path dir = f.out;
    auto cfg = resolve_config(app, f, date::load_config(dir));
    cfg.out = dir;
    auto data = date::prepare_data(cfg);
    cfg.resolve(data.full);
    return {cfg, std::move(data)};
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto v = date::parse_number(item);
        if (!v) throw date::ArgumentError("not a number: '" + item + "'");
        out.push_back(*v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_logger_st("dategen"));
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"Distribution-aware tabular data generation"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    Flags f;
    auto* run = app.add_subcommand("run", "full pipeline into --out");
    add_run_flags(run, f);
    run->add_option("--out", f.out, "run directory")->required();

    auto* disc = app.add_subcommand("discover", "discovery stage into --out");
    add_run_flags(disc, f);
    disc->add_option("--out", f.out, "run directory")->required();

    auto* gen = app.add_subcommand("generate", "generation stage against the run in --out");
    add_run_flags(gen, f);
    gen->add_option("--out", f.out, "prior run directory")->required()->check(CLI::ExistingDirectory);

    auto* sel = app.add_subcommand("select", "selection and evaluation against the run in --out");
    add_run_flags(sel, f);
    sel->add_option("--out", f.out, "prior run directory")->required()->check(CLI::ExistingDirectory);

    std::string fx_name;
    auto* fx = app.add_subcommand("fixtures", "write a built-in dataset as CSV");
    fx->add_option("--name", fx_name, "piecewise, greedy_trap, duplicate_markers or mixture2")->required();
    fx->add_option("--seed", f.seed, "seed");
    fx->add_option("--out", f.out, "CSV path")->required();

    std::size_t bk = 0, bn = 0;
    std::string mu;
    auto* bound = app.add_subcommand("bound", "misidentification bound for K arms, budget n, gaps mu");
    bound->add_option("--k", bk, "arm count")->required();
    bound->add_option("--n", bn, "budget")->required();
    bound->add_option("--mu", mu, "comma-separated gaps")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (verbose) spdlog::set_level(spdlog::level::debug);

    try {
        if (*run) {
            auto cfg = resolve_config(run, f);
            auto report = date::run_pipeline(cfg);
            std::cout << date::to_json(report).dump(2) << '\n';
        } else if (*disc) {
            auto cfg = resolve_config(disc, f);
            auto data = date::prepare_data(cfg);
            cfg.resolve(data.full);
            std::filesystem::create_directories(cfg.out);
            date::save_config(cfg.out, cfg);
            auto d = date::discover(data.parts.train, cfg.discovery);
            date::save_discovery(cfg.out, d);
            std::cout << d.examples.size() << " examples, " << d.stats.models_trained << " models trained, "
                      << d.stats.shares << " shares\n";
        } else if (*gen) {
            auto prior = load_prior(gen, f);
            auto& cfg = prior.cfg;
            date::save_config(cfg.out, cfg);
            auto d = date::load_discovery(cfg.out, prior.data.parts.train);
            auto backend = date::make_backend(cfg, prior.data.parts.train, cfg.out / "transcripts");
            auto g = date::run_generation(d, prior.data.parts.train, cfg.generation, *backend);
            date::save_arms(cfg.out, g.candidates, g.stats);
            std::cout << g.candidates.size() << " candidates\n";
        } else if (*sel) {
            auto prior = load_prior(sel, f);
            auto& cfg = prior.cfg;
            date::save_config(cfg.out, cfg);
            const auto& parts = prior.data.parts;
            auto d = date::load_discovery(cfg.out, parts.train);
            auto arms = date::load_arms(cfg.out, parts.train.schema_ptr());
            auto s = date::select_arms(cfg, d, arms, parts.train, parts.val);
            date::save_selection(cfg.out, s);
            auto report = date::evaluate_run(cfg, prior.data, d, arms, s);
            date::save_report(cfg.out, report);
            std::cout << date::to_json(report).dump(2) << '\n';
        } else if (*fx) {
            date::write_csv(date::make_fixture(fx_name, f.seed), f.out);
        } else if (*bound) {
            auto gaps = parse_list(mu);
            auto b = date::error_bound(bk, bn, gaps);
            std::cout << date::format_number(b.value) << (b.informative ? "" : " (uninformative)") << '\n';
        }
    } catch (const date::ArgumentError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
