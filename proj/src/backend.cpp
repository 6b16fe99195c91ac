#include "date/backend.hpp"

#include "date/error.hpp"
#include "date/rule_io.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

namespace date {

// ---------------------------------------------------------------- transcripts

TranscriptLog::TranscriptLog(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    std::filesystem::create_directories(dir_);
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() == ".json") ++next_;
    }
}

void TranscriptLog::write(const std::string& kind, const std::string& backend, const std::string& prompt,
                          const std::string& response) {
    if (!enabled()) return;
    char name[64];
    std::snprintf(name, sizeof name, "%04zu_%s.json", next_++, kind.c_str());
    nlohmann::json j{{"kind", kind}, {"backend", backend}, {"prompt", prompt}, {"response", response}};
    std::ofstream out(dir_ / name);
    if (!out) throw BackendError("cannot write transcript " + (dir_ / name).string());
    out << j.dump(2) << "\n";
}

namespace {

std::string csv_block(const Schema& schema, std::span<const Record> rows) {
    std::string out = "```csv\n";
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (i) out += ',';
        out += quote_csv_field(schema.attribute(i).name);
    }
    out += "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out += ',';
            out += quote_csv_field(r[i].str());
        }
        out += "\n";
    }
    return out + "```\n";
}

std::string rules_text(std::span<const Dgr> rules) {
    std::string out;
    for (const auto& r : rules) out += to_text(r) + "\n";
    return out;
}

}  // namespace

// ---------------------------------------------------------------- synthetic

SyntheticBackend::SyntheticBackend(std::optional<Table> reference, Labeler label, std::filesystem::path transcripts)
    : reference_(std::move(reference)), label_(std::move(label)), log_(std::move(transcripts)) {}

namespace {

struct Column {
    double lo = 0.0;
    double hi = 0.0;
    bool integral = true;
    bool seen = false;
    std::vector<std::string> tokens;  // with multiplicity
};

void observe(std::vector<Column>& cols, const Schema& schema, const Record& row, bool tokens) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
        auto& col = cols[c];
        if (row[c].is_numeric()) {
            double v = row[c].number();
            if (!col.seen) {
                col.lo = col.hi = v;
                col.seen = true;
            }
            col.lo = std::min(col.lo, v);
            col.hi = std::max(col.hi, v);
            if (v != std::floor(v)) col.integral = false;
        } else if (tokens) {
            col.tokens.push_back(row[c].token());
        }
    }
}

// Samples rows inside one clause. Infeasible when the clause is empty within
// the observed ranges.
class ClauseSampler {
public:
    ClauseSampler(const Schema& schema, const std::vector<Column>& cols, const Conjunction& clause)
        : schema_(schema), cols_(cols), lo_(schema.size()), hi_(schema.size()), eq_(schema.size()),
          ne_(schema.size()) {
        for (std::size_t c = 0; c < schema.size(); ++c) {
            lo_[c] = cols[c].lo;
            hi_[c] = cols[c].hi;
        }
        for (const auto& p : clause.predicates()) {
            std::size_t c = schema.require_index(p.attribute);
            switch (p.op) {
                case Op::Gt:
                case Op::Ge: lo_[c] = std::max(lo_[c], p.constant.number()); break;
                case Op::Lt:
                case Op::Le: hi_[c] = std::min(hi_[c], p.constant.number()); break;
                case Op::Eq: eq_[c] = p.constant.token(); break;
                case Op::Ne: ne_[c].push_back(p.constant.token()); break;
            }
        }
        feasible_ = clause.satisfiable();
        for (std::size_t c = 0; c < schema.size() && feasible_; ++c) {
            if (c == schema.target_index()) continue;
            if (schema.attribute(c).kind == Kind::Numeric) {
                if (lo_[c] > hi_[c]) feasible_ = false;
                if (cols[c].integral && std::ceil(lo_[c]) > std::floor(hi_[c])) feasible_ = false;
            } else if (!eq_[c] && allowed(c).empty()) {
                feasible_ = false;
            }
        }
    }

    bool feasible() const { return feasible_; }

    Record sample(std::mt19937_64& rng) const {
        Record row(schema_.size());
        for (std::size_t c = 0; c < schema_.size(); ++c) {
            if (c == schema_.target_index()) continue;
            if (schema_.attribute(c).kind == Kind::Numeric) {
                if (cols_[c].integral) {
                    std::uniform_int_distribution<long long> d(static_cast<long long>(std::ceil(lo_[c])),
                                                               static_cast<long long>(std::floor(hi_[c])));
                    row[c] = Value(static_cast<double>(d(rng)));
                } else if (lo_[c] == hi_[c]) {
                    row[c] = Value(lo_[c]);
                } else {
                    std::uniform_real_distribution<double> d(lo_[c], hi_[c]);
                    row[c] = Value(d(rng));
                }
            } else if (eq_[c]) {
                row[c] = Value(*eq_[c]);
            } else {
                auto pool = allowed(c);
                std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
                row[c] = Value(pool[d(rng)]);
            }
        }
        return row;
    }

private:
    std::vector<std::string> allowed(std::size_t c) const {
        std::vector<std::string> out;
        for (const auto& t : cols_[c].tokens) {
            if (std::find(ne_[c].begin(), ne_[c].end(), t) == ne_[c].end()) out.push_back(t);
        }
        return out;
    }

    const Schema& schema_;
    const std::vector<Column>& cols_;
    std::vector<double> lo_, hi_;
    std::vector<std::optional<std::string>> eq_;
    std::vector<std::vector<std::string>> ne_;
    bool feasible_ = true;
};

class NearestLabel {
public:
    NearestLabel(const Schema& schema, const std::vector<Column>& cols, std::vector<const Record*> rows)
        : schema_(schema), cols_(cols), rows_(std::move(rows)) {}

    Value operator()(const Record& row) const {
        double best = std::numeric_limits<double>::infinity();
        const Record* hit = nullptr;
        for (const auto* cand : rows_) {
            double d = 0.0;
            for (std::size_t c = 0; c < schema_.size(); ++c) {
                if (c == schema_.target_index()) continue;
                if (row[c].is_numeric()) {
                    double w = cols_[c].hi - cols_[c].lo;
                    double diff = (row[c].number() - (*cand)[c].number()) / (w > 0 ? w : 1.0);
                    d += diff * diff;
                } else if (row[c] != (*cand)[c]) {
                    d += 1.0;
                }
            }
            if (d < best) {
                best = d;
                hit = cand;
            }
        }
        if (!hit) throw BackendError("synthetic backend has no rows to label from");
        return (*hit)[schema_.target_index()];
    }

private:
    const Schema& schema_;
    const std::vector<Column>& cols_;
    std::vector<const Record*> rows_;
};

}  // namespace

std::vector<Record> SyntheticBackend::generate(const Schema& schema, const GenerateRequest& req) {
    std::vector<Column> cols(schema.size());
    std::vector<const Record*> label_rows;
    for (const auto& e : req.examples) {
        for (const auto& r : e.rows.rows()) {
            observe(cols, schema, r, true);
            label_rows.push_back(&r);
        }
    }
    if (reference_) {
        std::vector<Column> ref(schema.size());
        for (const auto& r : reference_->rows()) observe(ref, schema, r, label_rows.empty());
        for (std::size_t c = 0; c < schema.size(); ++c) {
            cols[c].lo = ref[c].lo;
            cols[c].hi = ref[c].hi;
            cols[c].integral = ref[c].integral;
            if (cols[c].tokens.empty()) cols[c].tokens = ref[c].tokens;
        }
        if (label_rows.empty()) {
            for (const auto& r : reference_->rows()) label_rows.push_back(&r);
        }
    }
    NearestLabel nearest(schema, cols, label_rows);

    std::vector<Dgr> rules;
    if (req.focus) rules.push_back(*req.focus);
    else {
        for (const auto& e : req.examples) rules.push_back(e.rule);
    }
    if (rules.empty()) throw BackendError("synthetic backend needs at least one rule");

    std::mt19937_64 rng(req.seed);
    std::vector<double> even(rules.size(), 1.0);
    auto per_rule = apportion(req.count, even);
    std::vector<Record> out;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        std::vector<Conjunction> clauses = rules[i].clauses();
        if (clauses.empty()) clauses.emplace_back();
        std::vector<ClauseSampler> samplers;
        for (const auto& c : clauses) {
            ClauseSampler s(schema, cols, c);
            if (s.feasible()) samplers.push_back(std::move(s));
        }
        if (samplers.empty()) {
            spdlog::info("synthetic backend: rule {} cannot be satisfied, no rows", to_text(rules[i]));
            continue;
        }
        CompiledRule check(schema, rules[i]);
        std::vector<double> w(samplers.size(), 1.0);
        auto per_clause = apportion(per_rule[i], w);
        for (std::size_t s = 0; s < samplers.size(); ++s) {
            std::size_t made = 0;
            for (std::size_t attempt = 0; made < per_clause[s] && attempt < 20 * per_clause[s] + 20; ++attempt) {
                Record row = samplers[s].sample(rng);
                if (!check(row)) continue;
                row[schema.target_index()] = label_ ? label_(row) : nearest(row);
                out.push_back(std::move(row));
                ++made;
            }
        }
    }

    if (log_.enabled()) {
        std::string prompt;
        try {
            prompt = render_prompt(schema, req.examples, req.count, prompt_, req.focus).text;
        } catch (const PromptError&) {
        }
        log_.write("generate", name(), prompt, csv_block(schema, out));
    }
    return out;
}

std::vector<Dgr> SyntheticBackend::refine_rules(const Schema& schema, const RefineRequest& req) {
    std::vector<const RuleFeedback*> ranked;
    for (const auto& f : req.feedback) {
        if (f.delta > 0.0) ranked.push_back(&f);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RuleFeedback* a, const RuleFeedback* b) { return a->delta > b->delta; });
    std::vector<Dgr> out;
    for (const auto* f : ranked) {
        if (out.size() >= req.max_rules) break;
        if (f->rule.is_identity()) continue;
        if (std::find(out.begin(), out.end(), f->rule) == out.end()) out.push_back(f->rule);
    }
    if (log_.enabled()) {
        std::string prompt;
        try {
            prompt = render_refine_prompt(schema, req.examples, req.feedback, req.max_rules, prompt_).text;
        } catch (const PromptError&) {
        }
        log_.write("refine", name(), prompt, rules_text(out));
    }
    return out;
}

// ---------------------------------------------------------------- LLM

std::optional<LlmOptions> LlmOptions::from_env() {
    const char* endpoint = std::getenv("DATE_LLM_ENDPOINT");
    if (!endpoint || !*endpoint) return std::nullopt;
    LlmOptions o;
    o.endpoint = endpoint;
    if (const char* key = std::getenv("DATE_LLM_API_KEY")) o.api_key = key;
    if (const char* model = std::getenv("DATE_LLM_MODEL")) o.model = model;
    return o;
}

LlmBackend::LlmBackend(LlmOptions options, std::filesystem::path transcripts, Transport transport)
    : options_(std::move(options)), log_(std::move(transcripts)), transport_(std::move(transport)) {
    if (!transport_) {
        if (options_.endpoint.empty()) throw ConfigError("LLM backend needs DATE_LLM_ENDPOINT");
        transport_ = http_transport(options_.endpoint, options_.api_key);
    }
}

std::string LlmBackend::request_body(const std::string& prompt) const {
    nlohmann::json body{
        {"model", options_.model},
        {"messages",
         {{{"role", "system"}, {"content", "You generate realistic tabular data and follow the given rules exactly."}},
          {{"role", "user"}, {"content", prompt}}}},
        {"temperature", options_.temperature},
        {"max_tokens", options_.max_tokens}};
    return body.dump();
}

std::string LlmBackend::response_text(const std::string& body) {
    try {
        auto j = nlohmann::json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("unexpected LLM response shape: ") + e.what());
    }
}

std::string LlmBackend::complete(const std::string& kind, const std::string& prompt) {
    std::string body = request_body(prompt);
    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
        try {
            std::string text = response_text(transport_(body));
            log_.write(kind, name(), prompt, text);
            return text;
        } catch (const std::exception& e) {
            last_error = e.what();
            if (attempt == options_.retries) break;
            auto wait = options_.backoff.empty()
                            ? std::chrono::milliseconds(0)
                            : options_.backoff[std::min<std::size_t>(attempt, options_.backoff.size() - 1)];
            spdlog::warn("LLM call failed ({}), retrying in {} ms", last_error, wait.count());
            std::this_thread::sleep_for(wait);
        }
    }
    throw BackendError("LLM call failed after " + std::to_string(options_.retries + 1) + " attempts: " + last_error);
}

std::vector<Record> LlmBackend::generate(const Schema& schema, const GenerateRequest& req) {
    auto prompt = render_prompt(schema, req.examples, req.count, options_.prompt, req.focus);
    auto parsed = parse_generated(complete("generate", prompt.text), schema);
    if (!parsed.rejected.empty()) spdlog::info("LLM output: {} lines rejected", parsed.rejected.size());
    return std::move(parsed.rows);
}

std::vector<Dgr> LlmBackend::refine_rules(const Schema& schema, const RefineRequest& req) {
    auto prompt = render_refine_prompt(schema, req.examples, req.feedback, req.max_rules, options_.prompt);
    return parse_rules(complete("refine", prompt.text), schema);
}

Transport http_transport(const std::string& endpoint, const std::string& api_key) {
    static const std::regex url(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint, m, url)) throw ConfigError("malformed LLM endpoint '" + endpoint + "'");
    std::string origin = m[1].str() + "://" + m[2].str() + (m[3].matched ? ":" + m[3].str() : "");
    std::string path = m[4].matched ? m[4].str() : "/v1/chat/completions";
    return [origin, path, api_key](const std::string& body) {
        httplib::Client cli(origin);
        cli.set_connection_timeout(10);
        cli.set_read_timeout(120);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        auto res = cli.Post(path, headers, body, "application/json");
        if (!res) throw BackendError("HTTP request failed: " + httplib::to_string(res.error()));
        if (res->status != 200) throw BackendError("HTTP status " + std::to_string(res->status));
        return res->body;
    };
}

// ---------------------------------------------------------------- replay

ReplayBackend::ReplayBackend(const std::filesystem::path& transcripts, std::filesystem::path record_to)
    : log_(std::move(record_to)) {
    if (!std::filesystem::is_directory(transcripts))
        throw ConfigError("replay needs a transcript directory, got " + transcripts.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(transcripts)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        try {
            auto j = nlohmann::json::parse(in);
            entries_.push_back({j.at("kind").get<std::string>(), j.value("backend", ""), j.value("prompt", ""),
                                j.at("response").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("bad transcript " + f.string() + ": " + e.what());
        }
    }
}

std::string ReplayBackend::next_response(const std::string& kind) {
    if (next_ >= entries_.size()) throw BackendError("replay transcripts exhausted");
    const auto& e = entries_[next_++];
    if (e.kind != kind) throw BackendError("replay expected a '" + kind + "' call but the transcript has '" + e.kind + "'");
    log_.write(e.kind, e.backend, e.prompt, e.response);
    return e.response;
}

std::vector<Record> ReplayBackend::generate(const Schema& schema, const GenerateRequest&) {
    return parse_generated(next_response("generate"), schema).rows;
}

std::vector<Dgr> ReplayBackend::refine_rules(const Schema& schema, const RefineRequest&) {
    return parse_rules(next_response("refine"), schema);
}

}  // namespace date
