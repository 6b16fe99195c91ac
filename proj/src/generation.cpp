#include "date/generation.hpp"

#include "date/error.hpp"
#include "date/rule_io.hpp"
#include "date/seed.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_set>

namespace date {

std::vector<PathGroup> group_by_path(const TreeModel& m, const Table& rows) {
    std::map<std::string, std::pair<DecisionPath, std::vector<std::size_t>>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        DecisionPath p = m.path(rows.row(i));
        auto it = groups.find(p.path_key);
        if (it == groups.end()) it = groups.emplace(p.path_key, std::make_pair(p, std::vector<std::size_t>{})).first;
        it->second.second.push_back(i);
    }
    std::vector<PathGroup> out;
    for (auto& [key, g] : groups) {
        out.push_back({key, Dgr(to_conjunction(g.first)), rows.select(g.second)});
    }
    return out;
}

bool quality_filter(const TreeModel& m, const Table& h, double rho_m) {
    return std::all_of(h.rows().begin(), h.rows().end(), [&](const Record& r) { return row_error(m, r) <= rho_m; });
}

double delta_score(const TreeHyper& hyper, const Table& t_train, const Table& t_val, const Table& h) {
    if (t_val.empty()) throw ArgumentError("delta needs a nonempty evaluation table");
    TreeModel base = train(t_train, hyper, "base");
    TreeModel grown = train(union_of(t_train, h.with_provenance(t_train.provenance())), hyper, "grown");
    return subset_error(base, t_val) - subset_error(grown, t_val);
}

namespace {

std::string row_key(const Record& r) {
    std::string k;
    for (const auto& v : r) {
        k += v.is_numeric() ? "n" : "s";
        k += v.str();
        k += '\x1f';
    }
    return k;
}

Table union_by_id(const std::vector<const Example*>& examples) {
    Table out = empty_like(examples.front()->data);
    std::unordered_set<RowId> seen;
    for (const auto* e : examples) {
        std::vector<std::size_t> fresh;
        for (std::size_t i = 0; i < e->data.size(); ++i) {
            if (seen.insert(e->data.id(i)).second) fresh.push_back(i);
        }
        out = union_of(out, e->data.select(fresh));
    }
    return out;
}

bool usable_rule(const Schema& schema, const Dgr& rule) {
    if (rule.is_identity()) return false;
    try {
        validate_rule(schema, rule);
    } catch (const SchemaError&) {
        return false;
    }
    return std::any_of(rule.clauses().begin(), rule.clauses().end(),
                       [](const Conjunction& c) { return c.satisfiable(); });
}

class ModelLoop {
public:
    ModelLoop(const PoolModel& pm, std::size_t model_index, std::vector<const Example*> examples, const Table& train,
              const GenerationConfig& cfg, GeneratorBackend& backend, const std::unordered_set<std::string>& originals,
              GenerationResult& result, RowId& next_id)
        : pm_(pm), mi_(model_index), train_(train), cfg_(cfg), backend_(backend), originals_(originals),
          result_(result), next_id_(next_id), t_m_(union_by_id(examples)), fit_(t_m_), hold_(t_m_) {
        std::vector<Example> copies;
        for (const auto* e : examples) copies.push_back(*e);
        context_ = build_prompt_examples(copies, cfg.per_rule, mix_seed(cfg.seed, {mi_, 0xC0}));
        split_holdout();
    }

    void run() {
        for (std::size_t it = 1; it <= cfg_.iterations; ++it) {
            std::vector<std::size_t> fresh;
            call(it, 0, std::nullopt, fresh);
            if (cfg_.dgr_opt_on) refine(it, fresh);
            bool improved = std::any_of(fresh.begin(), fresh.end(),
                                        [&](std::size_t c) { return result_.candidates[c].delta > 0.0; });
            if (!improved) {
                spdlog::info("generation: model {} stops after iteration {} (no positive delta)", pm_.model.id(), it);
                break;
            }
        }
    }

private:
    void split_holdout() {
        const std::size_t n = t_m_.size();
        const std::size_t min_rows = 2 * std::max<std::size_t>(pm_.model.hyper().min_leaf, 1);
        std::size_t n_hold = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg_.holdout));
        n_hold = std::max<std::size_t>(n_hold, 1);
        if (n_hold >= n || n - n_hold < min_rows) return;  // too small: score in-sample
        std::vector<std::size_t> pos(n);
        std::iota(pos.begin(), pos.end(), 0);
        std::mt19937_64 rng(mix_seed(cfg_.seed, {mi_, 0x501}));
        std::shuffle(pos.begin(), pos.end(), rng);
        std::vector<std::size_t> hold(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_hold));
        std::vector<std::size_t> fit(pos.begin() + static_cast<std::ptrdiff_t>(n_hold), pos.end());
        std::sort(hold.begin(), hold.end());
        std::sort(fit.begin(), fit.end());
        fit_ = t_m_.select(fit);
        hold_ = t_m_.select(hold);
    }

    void call(std::size_t it, std::size_t slot, const std::optional<Dgr>& focus, std::vector<std::size_t>& fresh) {
        GenerateRequest req{context_, cfg_.per_call, mix_seed(cfg_.seed, {mi_, it, slot}), focus};
        std::vector<Record> rows;
        ++result_.stats.generate_calls;
        try {
            rows = backend_.generate(train_.schema(), req);
        } catch (const BackendError& e) {
            ++result_.stats.failed_calls;
            spdlog::warn("generation: model {} iteration {} skipped: {}", pm_.model.id(), it, e.what());
            return;
        }
        result_.stats.rows_returned += rows.size();
        handle(std::move(rows), focus, it, fresh);
    }

    void refine(std::size_t it, std::vector<std::size_t>& fresh) {
        RefineRequest req{context_, {}, cfg_.max_refined, mix_seed(cfg_.seed, {mi_, it, 0xEF})};
        for (auto c : fresh) {
            const auto& cand = result_.candidates[c];
            req.feedback.push_back({cand.rule, cand.delta, cand.data.size()});
        }
        std::vector<Dgr> rules;
        ++result_.stats.refine_calls;
        try {
            rules = backend_.refine_rules(train_.schema(), req);
        } catch (const BackendError& e) {
            ++result_.stats.failed_calls;
            spdlog::warn("generation: refine for model {} iteration {} skipped: {}", pm_.model.id(), it, e.what());
            return;
        }
        std::size_t used = 0;
        std::vector<std::size_t> more;
        for (auto& r : rules) {
            if (used >= cfg_.max_refined) break;
            Dgr bound;
            try {
                bound = bind_to_schema(train_.schema(), r);
            } catch (const SchemaError&) {
                continue;
            }
            if (!usable_rule(train_.schema(), bound)) continue;
            ++used;
            call(it, used, bound, more);
        }
        fresh.insert(fresh.end(), more.begin(), more.end());
    }

    void handle(std::vector<Record> rows, const std::optional<Dgr>& focus, std::size_t it,
                std::vector<std::size_t>& fresh) {
        const Schema& schema = train_.schema();
        std::optional<Dgr> required = focus;
        if (!cfg_.dt_reasoning_on && !required) {
            Dgr any;
            bool first = true;
            for (const auto& e : context_) {
                any = first ? e.rule : disjoin(any, e.rule);
                first = false;
            }
            required = any;
        }
        std::optional<CompiledRule> check;
        if (required) check.emplace(schema, *required);

        std::vector<Record> kept;
        std::vector<RowId> ids;
        std::unordered_set<std::string> batch;
        for (auto& r : rows) {
            try {
                check_record(schema, r);
            } catch (const SchemaError&) {
                ++result_.stats.rows_off_rule;
                continue;
            }
            if (check && !(*check)(r)) {
                ++result_.stats.rows_off_rule;
                continue;
            }
            std::string key = row_key(r);
            if (originals_.count(key) || !batch.insert(key).second) {
                ++result_.stats.duplicates_dropped;
                continue;
            }
            kept.push_back(std::move(r));
            ids.push_back(kGeneratedRowBit | next_id_++);
        }
        if (kept.empty()) return;
        Table h(train_.schema_ptr(), std::move(kept), Provenance::Generated, std::move(ids));

        std::vector<PathGroup> groups;
        if (cfg_.dt_reasoning_on) groups = group_by_path(pm_.model, h);
        else groups.push_back({"CALL", *required, h});

        for (auto& g : groups) {
            if (!quality_filter(pm_.model, g.data, pm_.rho_m)) {
                ++result_.stats.groups_filtered;
                continue;
            }
            double delta = delta_score(pm_.model.hyper(), fit_, hold_, g.data);
            double delta_in = delta_score(pm_.model.hyper(), t_m_, t_m_, g.data);
            std::size_t index = result_.candidates.size();
            std::size_t n = std::min(cfg_.per_rule, g.data.size());
            Table sample = stratified_sample(g.data, n, mix_seed(cfg_.seed, {mi_, it, index}));
            context_.push_back({pm_.model.id(), g.rule, std::move(sample), 0.0, false});
            result_.candidates.push_back(ArmCandidate{pm_.model.id(), pm_.rho_m, pm_.rho_m - delta, g.rule,
                                                      std::move(g.data), delta, delta_in, it, index});
            fresh.push_back(index);
        }
    }

    const PoolModel& pm_;
    std::uint64_t mi_;
    const Table& train_;
    const GenerationConfig& cfg_;
    GeneratorBackend& backend_;
    const std::unordered_set<std::string>& originals_;
    GenerationResult& result_;
    RowId& next_id_;
    Table t_m_;
    Table fit_;
    Table hold_;
    std::vector<PromptExample> context_;
};

}  // namespace

GenerationResult run_generation(const DiscoveryResult& discovery, const Table& train, const GenerationConfig& cfg,
                                GeneratorBackend& backend) {
    if (cfg.iterations < 1) throw ConfigError("iterations must be at least 1");
    if (cfg.per_call < 1) throw ConfigError("per_call must be at least 1");
    if (!(cfg.holdout > 0.0 && cfg.holdout < 1.0)) throw ConfigError("holdout must be in (0, 1)");
    if (discovery.examples.empty()) throw ArgumentError("generation needs at least one discovered example");

    std::unordered_set<std::string> originals;
    for (const auto& r : train.rows()) originals.insert(row_key(r));

    GenerationResult result;
    RowId next_id = 0;
    for (std::size_t mi = 0; mi < discovery.models.size(); ++mi) {
        const auto& pm = discovery.models[mi];
        std::vector<const Example*> group;
        for (const auto& e : discovery.examples) {
            if (e.model_id == pm.model.id()) group.push_back(&e);
        }
        if (group.empty()) continue;
        ModelLoop(pm, mi, std::move(group), train, cfg, backend, originals, result, next_id).run();
    }
    spdlog::info("generation: {} candidates from {} generate calls", result.candidates.size(),
                 result.stats.generate_calls);
    return result;
}

namespace {

nlohmann::json rows_json(const Table& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows()) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& v : r) row.push_back(to_json(v));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

nlohmann::json to_json(const ArmCandidate& c) {
    return {{"index", c.index},
            {"model_id", c.model_id},
            {"iteration", c.iteration},
            {"rho_m", c.rho_m},
            {"rho_k", c.rho_k},
            {"delta", c.delta},
            {"delta_in_sample", c.delta_in_sample},
            {"rule_text", to_text(c.rule)},
            {"rule", to_json(c.rule)},
            {"ids", c.data.ids()},
            {"rows", rows_json(c.data)}};
}

ArmCandidate arm_from_json(const nlohmann::json& j, const SchemaPtr& schema) {
    try {
        std::vector<Record> rows;
        for (const auto& jr : j.at("rows")) {
            Record r;
            for (const auto& v : jr) r.push_back(value_from_json(v));
            rows.push_back(std::move(r));
        }
        Table data(schema, std::move(rows), Provenance::Generated, j.at("ids").get<std::vector<RowId>>());
        return ArmCandidate{j.at("model_id").get<std::string>(),
                            j.at("rho_m").get<double>(),
                            j.at("rho_k").get<double>(),
                            dgr_from_json(j.at("rule")),
                            std::move(data),
                            j.at("delta").get<double>(),
                            j.at("delta_in_sample").get<double>(),
                            j.at("iteration").get<std::size_t>(),
                            j.at("index").get<std::size_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed arm JSON: ") + e.what());
    }
}

}  // namespace date
