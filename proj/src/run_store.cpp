#include "date/run_store.hpp"

#include "date/error.hpp"
#include "date/rule_io.hpp"

#include <fstream>
#include <map>
#include <unordered_map>

namespace date {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw LoadError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_config(const std::filesystem::path& dir, const RunConfig& cfg) { write_json(dir / "config.json", to_json(cfg)); }

RunConfig load_config(const std::filesystem::path& dir) { return config_from_json(read_json(dir / "config.json")); }

void save_discovery(const std::filesystem::path& dir, const DiscoveryResult& d) {
    nlohmann::json ex = nlohmann::json::array();
    for (const auto& e : d.examples) {
        ex.push_back({{"model_id", e.model_id},
                      {"rho", e.rho},
                      {"ind", e.ind},
                      {"representative", e.representative},
                      {"rule_text", to_text(e.rule)},
                      {"rule", to_json(e.rule)},
                      {"row_ids", e.data.ids()}});
    }
    write_json(dir / "examples.json", ex);
    std::filesystem::create_directories(dir / "models");
    for (const auto& m : d.models) {
        auto j = m.model.to_json();
        j["rho_m"] = m.rho_m;
        write_json(dir / "models" / (m.model.id() + ".json"), j);
    }
    nlohmann::json expansions = nlohmann::json::array();
    for (const auto& x : d.expansions) {
        expansions.push_back({{"rule", to_text(Dgr(x.rule))},
                              {"ind", x.ind},
                              {"subset_size", x.subset_size},
                              {"required", x.required},
                              {"available", x.available},
                              {"pushed", x.pushed}});
    }
    const auto& s = d.stats;
    write_json(dir / "stats.json", {{"discovery",
                                     {{"models_trained", s.models_trained},
                                      {"shares", s.shares},
                                      {"queue_pops", s.queue_pops},
                                      {"rejected_models", s.rejected_models},
                                      {"small_subsets", s.small_subsets},
                                      {"covered_skips", s.covered_skips},
                                      {"model_order", [&] {
                                           std::vector<std::string> ids;
                                           for (const auto& m : d.models) ids.push_back(m.model.id());
                                           return ids;
                                       }()}}},
                                    {"expansions", expansions}});
}

DiscoveryResult load_discovery(const std::filesystem::path& dir, const Table& train_t) {
    DiscoveryResult d;
    auto stats = read_json(dir / "stats.json");
    const auto& s = stats.at("discovery");
    d.stats.models_trained = s.value("models_trained", std::size_t{0});
    d.stats.shares = s.value("shares", std::size_t{0});
    d.stats.queue_pops = s.value("queue_pops", std::size_t{0});
    d.stats.rejected_models = s.value("rejected_models", std::size_t{0});
    for (const auto& id : s.at("model_order")) {
        auto j = read_json(dir / "models" / (id.get<std::string>() + ".json"));
        d.models.push_back({TreeModel::from_json(j, train_t.schema_ptr()), j.at("rho_m").get<double>()});
    }
    std::unordered_map<RowId, std::size_t> pos;
    for (std::size_t i = 0; i < train_t.size(); ++i) pos[train_t.id(i)] = i;
    for (const auto& e : read_json(dir / "examples.json")) {
        std::vector<std::size_t> rows;
        for (const auto& id : e.at("row_ids")) {
            auto it = pos.find(id.get<RowId>());
            if (it == pos.end()) throw LoadError("example row " + std::to_string(id.get<RowId>()) + " not in train");
            rows.push_back(it->second);
        }
        auto ex = make_example(e.at("model_id").get<std::string>(), e.at("rho").get<double>(),
                               bind_to_schema(train_t.schema(), dgr_from_json(e.at("rule"))), train_t.select(rows),
                               e.at("ind").get<double>());
        ex.representative = e.value("representative", false);
        d.examples.push_back(std::move(ex));
    }
    return d;
}

void save_arms(const std::filesystem::path& dir, const std::vector<ArmCandidate>& arms, const GenerationStats& st) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& a : arms) j.push_back(to_json(a));
    write_json(dir / "arms.json", j);
    auto path = dir / "stats.json";
    nlohmann::json stats = std::filesystem::exists(path) ? read_json(path) : nlohmann::json::object();
    stats["generation"] = {{"generate_calls", st.generate_calls},     {"refine_calls", st.refine_calls},
                           {"rows_returned", st.rows_returned},       {"rows_off_rule", st.rows_off_rule},
                           {"duplicates_dropped", st.duplicates_dropped}, {"groups_filtered", st.groups_filtered},
                           {"failed_calls", st.failed_calls},         {"candidates", arms.size()}};
    write_json(path, stats);
}

std::vector<ArmCandidate> load_arms(const std::filesystem::path& dir, const SchemaPtr& schema) {
    std::vector<ArmCandidate> out;
    for (const auto& j : read_json(dir / "arms.json")) out.push_back(arm_from_json(j, schema));
    return out;
}

void save_selection(const std::filesystem::path& dir, const Selection& s) {
    write_json(dir / "mds_trace.json", {{"accepted", s.accepted}, {"models", s.trace}});
}

Selection load_selection(const std::filesystem::path& dir) {
    auto j = read_json(dir / "mds_trace.json");
    Selection s;
    s.accepted = j.at("accepted").get<std::vector<std::size_t>>();
    s.trace = j.at("models");
    return s;
}

void save_report(const std::filesystem::path& dir, const RunReport& r) { write_json(dir / "report.json", to_json(r)); }

}  // namespace date
