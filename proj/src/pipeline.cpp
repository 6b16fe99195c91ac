#include "date/pipeline.hpp"

#include "date/error.hpp"
#include "date/fixtures.hpp"
#include "date/run_store.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <set>
#include <unordered_set>

namespace date {

void RunConfig::set_seed(std::uint64_t s) {
    seed = s;
    split.seed = s;
    discovery.seed = s;
    discovery.hyper.seed = s;
    generation.seed = s;
    mds.seed = s;
    mds.hyper.seed = s;
    downstream.seed = s;
}

void RunConfig::resolve(const Table& data) {
    task = data.schema().task();
    target = data.schema().target_name();
    if (!rho) rho = DiscoveryConfig::defaults_for(*task).rho;
    if (!(*rho > 0.0)) throw ConfigError("rho must be positive");
    discovery.rho = *rho;
    mds.global_rho = *rho;
}

namespace {

nlohmann::json hyper_json(const TreeHyper& h) {
    return {{"max_depth", h.max_depth}, {"min_leaf", h.min_leaf}, {"seed", h.seed}};
}

void read_hyper(const nlohmann::json& j, TreeHyper& h) {
    h.max_depth = j.value("max_depth", h.max_depth);
    h.min_leaf = j.value("min_leaf", h.min_leaf);
    h.seed = j.value("seed", h.seed);
}

std::string overlap_name(OverlapMode m) { return m == OverlapMode::Exact ? "exact" : "interval"; }

OverlapMode overlap_from(const std::string& s) {
    if (s == "exact") return OverlapMode::Exact;
    if (s == "interval") return OverlapMode::Interval;
    throw ConfigError("unknown overlap mode '" + s + "'");
}

template <class F>
double timed(F&& f) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["data"] = c.data.string();
    j["fixture"] = c.fixture;
    j["target"] = c.target;
    j["task"] = c.task ? nlohmann::json(to_string(*c.task)) : nlohmann::json(nullptr);
    j["seed"] = c.seed;
    j["rho"] = c.rho ? nlohmann::json(*c.rho) : nlohmann::json(nullptr);
    j["iters"] = c.generation.iterations;
    j["alpha"] = c.mds.alpha;
    j["budget"] = c.mds.budget;
    j["backend"] = c.backend;
    j["selector"] = to_string(c.selector);
    j["top_m"] = c.top_m;
    j["oracle"] = c.oracle;
    j["replay_from"] = c.replay_from.string();
    j["out"] = c.out.string();
    j["split"] = {{"train", c.split.train_frac},
                  {"val", c.split.val_frac},
                  {"test", c.split.test_frac},
                  {"ordered", c.split.ordered},
                  {"seed", c.split.seed}};
    j["discovery"] = {{"max_models", c.discovery.max_models},
                      {"max_queue", c.discovery.max_queue},
                      {"sharing_on", c.discovery.sharing_on},
                      {"seed", c.discovery.seed},
                      {"hyper", hyper_json(c.discovery.hyper)}};
    j["generation"] = {{"per_call", c.generation.per_call},
                       {"per_rule", c.generation.per_rule},
                       {"max_refined", c.generation.max_refined},
                       {"holdout", c.generation.holdout},
                       {"dt_reasoning_on", c.generation.dt_reasoning_on},
                       {"dgr_opt_on", c.generation.dgr_opt_on},
                       {"token_budget", c.generation.prompt.token_budget},
                       {"seed", c.generation.seed}};
    j["mds"] = {{"ucb_c", c.mds.ucb_c},
                {"patience", c.mds.patience},
                {"overlap", overlap_name(c.mds.overlap)},
                {"seed", c.mds.seed}};
    j["downstream"] = hyper_json(c.downstream);
    return j;
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
        if (j.contains("seed")) c.set_seed(j.at("seed").get<std::uint64_t>());
        if (j.contains("data")) c.data = j.at("data").get<std::string>();
        c.fixture = j.value("fixture", c.fixture);
        c.target = j.value("target", c.target);
        if (j.contains("task") && !j.at("task").is_null()) c.task = task_from_string(j.at("task").get<std::string>());
        if (j.contains("rho") && !j.at("rho").is_null()) c.rho = j.at("rho").get<double>();
        c.generation.iterations = j.value("iters", c.generation.iterations);
        c.mds.alpha = j.value("alpha", c.mds.alpha);
        c.mds.budget = j.value("budget", c.mds.budget);
        c.backend = j.value("backend", c.backend);
        if (j.contains("selector")) c.selector = selector_from_string(j.at("selector").get<std::string>());
        c.top_m = j.value("top_m", c.top_m);
        c.oracle = j.value("oracle", c.oracle);
        if (j.contains("replay_from")) c.replay_from = j.at("replay_from").get<std::string>();
        if (j.contains("out")) c.out = j.at("out").get<std::string>();
        if (j.contains("split")) {
            const auto& s = j.at("split");
            c.split.train_frac = s.value("train", c.split.train_frac);
            c.split.val_frac = s.value("val", c.split.val_frac);
            c.split.test_frac = s.value("test", c.split.test_frac);
            c.split.ordered = s.value("ordered", c.split.ordered);
            c.split.seed = s.value("seed", c.split.seed);
        }
        if (j.contains("discovery")) {
            const auto& d = j.at("discovery");
            c.discovery.max_models = d.value("max_models", c.discovery.max_models);
            c.discovery.max_queue = d.value("max_queue", c.discovery.max_queue);
            c.discovery.sharing_on = d.value("sharing_on", c.discovery.sharing_on);
            c.discovery.seed = d.value("seed", c.discovery.seed);
            if (d.contains("hyper")) read_hyper(d.at("hyper"), c.discovery.hyper);
        }
        if (j.contains("generation")) {
            const auto& g = j.at("generation");
            c.generation.per_call = g.value("per_call", c.generation.per_call);
            c.generation.per_rule = g.value("per_rule", c.generation.per_rule);
            c.generation.max_refined = g.value("max_refined", c.generation.max_refined);
            c.generation.holdout = g.value("holdout", c.generation.holdout);
            c.generation.dt_reasoning_on = g.value("dt_reasoning_on", c.generation.dt_reasoning_on);
            c.generation.dgr_opt_on = g.value("dgr_opt_on", c.generation.dgr_opt_on);
            c.generation.prompt.token_budget = g.value("token_budget", c.generation.prompt.token_budget);
            c.generation.seed = g.value("seed", c.generation.seed);
            if (g.contains("generate_template")) {
                c.generation.prompt.generate_template = load_template(g.at("generate_template").get<std::string>());
            }
            if (g.contains("refine_template")) {
                c.generation.prompt.refine_template = load_template(g.at("refine_template").get<std::string>());
            }
        }
        if (j.contains("mds")) {
            const auto& m = j.at("mds");
            c.mds.ucb_c = m.value("ucb_c", c.mds.ucb_c);
            c.mds.patience = m.value("patience", c.mds.patience);
            if (m.contains("overlap")) c.mds.overlap = overlap_from(m.at("overlap").get<std::string>());
            c.mds.seed = m.value("seed", c.mds.seed);
        }
        if (j.contains("downstream")) read_hyper(j.at("downstream"), c.downstream);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

nlohmann::json to_json(const RunReport& r) {
    nlohmann::json j;
    j["task"] = to_string(r.task);
    j["error_metric"] = r.task == Task::Classification ? "error_rate" : "mse";
    j["baseline_error"] = r.baseline_error;
    j["augmented_error"] = r.augmented_error;
    j["error_reduction_pct"] = r.error_reduction_pct;
    j["syn"] = r.syn;
    j["arms"] = r.arms;
    j["accepted"] = r.accepted;
    j["models_trained"] = r.models_trained;
    j["shares"] = r.shares;
    j["examples"] = r.examples;
    j["selector"] = r.selector;
    j["backend"] = r.backend;
    j["downstream"] = hyper_json(r.downstream);
    j["rows"] = {{"train", r.train_rows}, {"val", r.val_rows}, {"test", r.test_rows}};
    j["timings"] = {{"load", r.timings.load},
                    {"discover", r.timings.discover},
                    {"generate", r.timings.generate},
                    {"select", r.timings.select},
                    {"evaluate", r.timings.evaluate}};
    if (!r.failed_stage.empty()) {
        j["failed_stage"] = r.failed_stage;
        j["error"] = r.error;
    }
    return j;
}

double evaluate_downstream(const Table& train_t, const Table& test, const TreeHyper& hyper) {
    if (!(train_t.schema() == test.schema())) throw SchemaError("train and test schemas differ");
    return downstream_error(train(train_t, hyper, "downstream"), test);
}

PreparedData prepare_data(const RunConfig& cfg) {
    SplitSpec spec = cfg.split;
    std::optional<Table> full;
    if (!cfg.fixture.empty()) {
        full = make_fixture(cfg.fixture, cfg.seed);
        if (fixture_ordered(cfg.fixture)) spec.ordered = true;
    } else {
        if (cfg.data.empty()) throw ConfigError("no dataset: pass a data path or a fixture name");
        if (cfg.target.empty()) throw ConfigError("no target column given");
        full = load_csv(cfg.data, LoadOptions{cfg.target, cfg.task, std::nullopt});
    }
    auto parts = split(*full, spec);
    spdlog::info("data: {} rows, split {}/{}/{}", full->size(), parts.train.size(), parts.val.size(),
                 parts.test.size());
    return {std::move(*full), std::move(parts)};
}

std::unique_ptr<GeneratorBackend> make_backend(const RunConfig& cfg, const Table& train_t,
                                               const std::filesystem::path& transcripts) {
    if (cfg.backend == "synthetic") {
        std::string oracle = cfg.oracle.empty() ? cfg.fixture : cfg.oracle;
        SyntheticBackend::Labeler label;
        if (!oracle.empty()) label = fixture_oracle(oracle);
        return std::make_unique<SyntheticBackend>(train_t, label, transcripts);
    }
    if (cfg.backend == "llm") {
        auto opts = LlmOptions::from_env();
        if (!opts) throw ConfigError("llm backend needs DATE_LLM_ENDPOINT");
        opts->prompt = cfg.generation.prompt;
        auto transport = http_transport(opts->endpoint, opts->api_key);
        return std::make_unique<LlmBackend>(*opts, transcripts, transport);
    }
    if (cfg.backend == "replay") {
        if (cfg.replay_from.empty()) throw ConfigError("replay backend needs a transcript directory");
        return std::make_unique<ReplayBackend>(cfg.replay_from, transcripts);
    }
    throw ConfigError("unknown backend '" + cfg.backend + "' (expected synthetic, llm or replay)");
}

Selection select_arms(const RunConfig& cfg, const DiscoveryResult& discovery, const std::vector<ArmCandidate>& arms,
                      const Table& train_t, const Table& val) {
    Selection out;
    std::vector<std::string> order;
    for (const auto& a : arms) {
        if (std::find(order.begin(), order.end(), a.model_id) == order.end()) order.push_back(a.model_id);
    }
    MdsConfig mcfg = cfg.mds;
    mcfg.hyper = cfg.downstream;
    for (const auto& mid : order) {
        std::vector<std::size_t> idx;
        std::vector<ArmCandidate> group;
        for (std::size_t i = 0; i < arms.size(); ++i) {
            if (arms[i].model_id == mid) {
                idx.push_back(i);
                group.push_back(arms[i]);
            }
        }
        std::vector<Example> context;
        for (const auto& e : discovery.examples) {
            if (e.model_id == mid) context.push_back(e);
        }
        std::vector<std::size_t> picked;
        nlohmann::json trace;
        switch (cfg.selector) {
            case Selector::Mds: {
                auto r = run_mds(group, context, train_t, val, mcfg);
                picked = r.accepted;
                trace = to_json(r);
                break;
            }
            case Selector::Fgs: picked = forward_greedy(group, train_t, val, cfg.downstream); break;
            case Selector::Bgs: picked = backward_greedy(group, train_t, val, cfg.downstream); break;
            case Selector::TopM: picked = top_m(group, train_t, val, cfg.downstream, cfg.top_m); break;
        }
        std::vector<std::size_t> global;
        for (auto p : picked) global.push_back(idx[p]);
        trace["arms"] = idx;
        trace["accepted_arms"] = global;
        out.trace[mid] = trace;
        out.accepted.insert(out.accepted.end(), global.begin(), global.end());
        spdlog::info("select[{}] model {}: {} of {} arms accepted", to_string(cfg.selector), mid, global.size(),
                     idx.size());
    }
    return out;
}

Table assemble(const Table& train_t, const std::vector<ArmCandidate>& arms, const std::vector<std::size_t>& accepted) {
    Table out = train_t;
    for (auto i : accepted) out = union_of(out, arms.at(i).data);
    return out;
}

void check_test_hygiene(const Table& test, const Table& train_t, const Table& val, const DiscoveryResult& discovery,
                        const std::vector<ArmCandidate>& arms) {
    std::unordered_set<RowId> test_ids(test.ids().begin(), test.ids().end());
    auto check = [&](const Table& t, const std::string& where) {
        for (auto id : t.ids()) {
            if (test_ids.count(id)) throw Error("test row " + std::to_string(id) + " leaked into " + where);
        }
    };
    check(train_t, "train");
    check(val, "val");
    for (const auto& e : discovery.examples) check(e.data, "example of " + e.model_id);
    for (const auto& a : arms) check(a.data, "arm " + std::to_string(a.index));
}

RunReport evaluate_run(const RunConfig& cfg, const PreparedData& data, const DiscoveryResult& discovery,
                       const std::vector<ArmCandidate>& arms, const Selection& selection) {
    const auto& p = data.parts;
    check_test_hygiene(p.test, p.train, p.val, discovery, arms);
    RunReport r;
    r.task = p.train.schema().task();
    Table augmented = assemble(p.train, arms, selection.accepted);
    r.baseline_error = evaluate_downstream(p.train, p.test, cfg.downstream);
    r.augmented_error =
        selection.accepted.empty() ? r.baseline_error : evaluate_downstream(augmented, p.test, cfg.downstream);
    r.error_reduction_pct =
        r.baseline_error > 0.0 ? (r.baseline_error - r.augmented_error) / r.baseline_error * 100.0 : 0.0;
    r.syn = augmented.size() - p.train.size();
    r.arms = arms.size();
    r.accepted = selection.accepted;
    r.models_trained = discovery.stats.models_trained;
    r.shares = discovery.stats.shares;
    r.examples = discovery.examples.size();
    r.selector = to_string(cfg.selector);
    r.backend = cfg.backend;
    r.downstream = cfg.downstream;
    r.train_rows = p.train.size();
    r.val_rows = p.val.size();
    r.test_rows = p.test.size();
    if (!cfg.out.empty()) write_csv(augmented, cfg.out / "augmented.csv");
    return r;
}

RunReport run_pipeline(const RunConfig& in) {
    RunConfig cfg = in;
    std::string stage = "load";
    StageTimings times;
    try {
        std::optional<PreparedData> data;
        times.load = timed([&] { data = prepare_data(cfg); });
        cfg.resolve(data->full);
        if (!cfg.out.empty()) {
            std::filesystem::create_directories(cfg.out);
            save_config(cfg.out, cfg);
        }

        stage = "discover";
        DiscoveryResult disc;
        times.discover = timed([&] { disc = discover(data->parts.train, cfg.discovery); });
        if (!cfg.out.empty()) save_discovery(cfg.out, disc);

        stage = "generate";
        GenerationResult gen;
        times.generate = timed([&] {
            auto transcripts = cfg.out.empty() ? std::filesystem::path{} : cfg.out / "transcripts";
            auto backend = make_backend(cfg, data->parts.train, transcripts);
            gen = run_generation(disc, data->parts.train, cfg.generation, *backend);
        });
        if (!cfg.out.empty()) save_arms(cfg.out, gen.candidates, gen.stats);

        stage = "select";
        Selection sel;
        times.select = timed([&] { sel = select_arms(cfg, disc, gen.candidates, data->parts.train, data->parts.val); });
        if (!cfg.out.empty()) save_selection(cfg.out, sel);

        stage = "evaluate";
        RunReport report;
        times.evaluate = timed([&] { report = evaluate_run(cfg, *data, disc, gen.candidates, sel); });
        report.timings = times;
        if (!cfg.out.empty()) save_report(cfg.out, report);
        spdlog::info("baseline {:.6g}, augmented {:.6g} ({:+.2f}%), SYN {}", report.baseline_error,
                     report.augmented_error, report.error_reduction_pct, report.syn);
        return report;
    } catch (const std::exception& e) {
        spdlog::error("stage {} failed: {}", stage, e.what());
        if (!cfg.out.empty()) {
            RunReport stub;
            stub.failed_stage = stage;
            stub.error = e.what();
            stub.timings = times;
            stub.selector = to_string(cfg.selector);
            stub.backend = cfg.backend;
            try {
                std::filesystem::create_directories(cfg.out);
                save_report(cfg.out, stub);
            } catch (const std::exception& w) {
                spdlog::error("could not write report stub: {}", w.what());
            }
        }
        throw;
    }
}

}  // namespace date
