#include "date/prompt.hpp"

#include "date/error.hpp"
#include "date/rule_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

namespace date {

const char* const kDefaultGenerateTemplate =
    "You generate synthetic rows for one distribution of a heterogeneous table.\n"
    "Each rule below selects a subset of the real data on which a single model predicts the target "
    "within tolerance. New rows must follow the same dependencies between the attributes and the target.\n"
    "\n"
    "Rules:\n"
    "{rules}\n"
    "\n"
    "Sample rows:\n"
    "{examples}\n"
    "\n"
    "Generate {count} new rows.\n"
    "{format}\n";

const char* const kDefaultRefineTemplate =
    "You refine distribution-guiding rules for a heterogeneous table.\n"
    "\n"
    "Current rules:\n"
    "{rules}\n"
    "\n"
    "Sample rows:\n"
    "{examples}\n"
    "\n"
    "Newly generated groups and their validation gain (positive helps):\n"
    "{feedback}\n"
    "\n"
    "Propose up to {count} new rules describing regions where more data would help. "
    "Write one rule per line in the same syntax, for example (a > 1 AND b <= 2). "
    "Use only the attributes above and never the target. Output only the rules.\n";

std::string load_template(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PromptError("cannot read prompt template " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

namespace {

std::string fill(std::string tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
    for (const auto& [key, value] : values) {
        std::string needle = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = tmpl.find(needle, pos)) != std::string::npos) {
            tmpl.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return tmpl;
}

std::string header_line(const Schema& schema) {
    std::string out;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (i) out += ',';
        out += quote_csv_field(schema.attribute(i).name);
    }
    return out;
}

std::string csv_row(const Record& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += quote_csv_field(row[i].str());
    }
    return out;
}

std::string rules_block(std::span<const PromptExample> examples, const std::optional<Dgr>& focus) {
    std::string out;
    if (focus) out += "Required rule for every new row: " + to_text(*focus) + "\n";
    for (std::size_t i = 0; i < examples.size(); ++i) {
        out += "Rule " + std::to_string(i + 1);
        if (examples[i].representative) out += " (representative)";
        out += ": " + to_text(examples[i].rule) + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

std::string examples_block(const Schema& schema, std::span<const PromptExample> examples, std::size_t per_rule) {
    std::string out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        std::size_t n = std::min(per_rule, examples[i].rows.size());
        if (n == 0) continue;
        if (!out.empty()) out += "\n";
        out += "Rows for rule " + std::to_string(i + 1) + ":\n```csv\n" + header_line(schema) + "\n";
        for (std::size_t r = 0; r < n; ++r) out += csv_row(examples[i].rows.row(r)) + "\n";
        out += "```";
    }
    return out;
}

std::size_t max_rows(std::span<const PromptExample> examples) {
    std::size_t m = 0;
    for (const auto& e : examples) m = std::max(m, e.rows.size());
    return m;
}

template <class Render>
Prompt fit_budget(std::span<const PromptExample> examples, const PromptConfig& cfg, Render&& render) {
    std::size_t top = max_rows(examples);
    for (std::size_t r = top;; --r) {
        std::string text = render(r);
        if (estimate_tokens(text) <= cfg.token_budget) return {std::move(text), r};
        if (r <= 1) break;
    }
    throw PromptError("token budget of " + std::to_string(cfg.token_budget) +
                      " is too small for the rules with one sample row each");
}

}  // namespace

Prompt render_prompt(const Schema& schema, std::span<const PromptExample> examples, std::size_t count,
                     const PromptConfig& cfg, const std::optional<Dgr>& focus) {
    if (examples.empty() && !focus) throw PromptError("prompt needs at least one example");
    std::string rules = rules_block(examples, focus);
    std::string format = "Return the rows as CSV inside one ```csv fenced block, starting with this header line:\n" +
                         header_line(schema) + "\nEvery row must satisfy " +
                         (focus ? std::string("the required rule") : std::string("at least one rule above")) +
                         " and include a value for the target '" + schema.target_name() + "'.";
    return fit_budget(examples, cfg, [&](std::size_t per_rule) {
        return fill(cfg.generate_template, {{"rules", rules},
                                            {"examples", examples_block(schema, examples, per_rule)},
                                            {"count", std::to_string(count)},
                                            {"format", format}});
    });
}

Prompt render_refine_prompt(const Schema& schema, std::span<const PromptExample> examples,
                            std::span<const RuleFeedback> feedback, std::size_t max_rules, const PromptConfig& cfg) {
    if (examples.empty()) throw PromptError("prompt needs at least one example");
    std::string rules = rules_block(examples, std::nullopt);
    std::string fb;
    for (const auto& f : feedback) {
        fb += to_text(f.rule) + "  gain=" + format_number(f.delta) + " rows=" + std::to_string(f.rows) + "\n";
    }
    if (fb.empty()) fb = "(none)";
    else fb.pop_back();
    return fit_budget(examples, cfg, [&](std::size_t per_rule) {
        return fill(cfg.refine_template, {{"rules", rules},
                                          {"examples", examples_block(schema, examples, per_rule)},
                                          {"feedback", fb},
                                          {"count", std::to_string(max_rules)}});
    });
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

struct Line {
    std::size_t number;
    std::string text;
};

// Lines inside fenced blocks if any fence exists, every line otherwise.
std::vector<Line> payload_lines(std::string_view raw) {
    std::vector<Line> all, fenced;
    bool inside = false, any_fence = false;
    std::size_t n = 0;
    std::istringstream in{std::string(raw)};
    std::string line;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.rfind("```", 0) == 0) {
            any_fence = true;
            inside = !inside;
            continue;
        }
        if (t.empty()) continue;
        all.push_back({n, t});
        if (inside) fenced.push_back({n, t});
    }
    return any_fence ? fenced : all;
}

bool is_missing(const std::string& s) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "?" || s == "null";
}

}  // namespace

ParsedRows parse_generated(std::string_view raw, const Schema& schema) {
    ParsedRows out;
    std::vector<std::size_t> order(schema.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (const auto& [number, text] : payload_lines(raw)) {
        auto fields = split_csv_line(text);
        for (auto& f : fields) f = trim(f);
        if (fields.size() == schema.size()) {
            std::vector<std::size_t> mapping;
            for (const auto& f : fields) {
                if (auto idx = schema.index_of(f)) mapping.push_back(*idx);
            }
            auto sorted = mapping;
            std::sort(sorted.begin(), sorted.end());
            if (mapping.size() == schema.size() && std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) {
                order = mapping;
                continue;
            }
        }
        if (fields.size() != schema.size()) {
            out.rejected.push_back({number, text,
                                    "expected " + std::to_string(schema.size()) + " fields, found " +
                                        std::to_string(fields.size())});
            continue;
        }
        Record rec(schema.size());
        std::string reason;
        for (std::size_t i = 0; i < fields.size() && reason.empty(); ++i) {
            const auto& attr = schema.attribute(order[i]);
            if (is_missing(fields[i])) {
                reason = "column '" + attr.name + "' is missing";
            } else if (attr.kind == Kind::Numeric) {
                auto v = parse_number(fields[i]);
                if (!v) reason = "column '" + attr.name + "': '" + fields[i] + "' is not numeric";
                else rec[order[i]] = Value(*v);
            } else {
                rec[order[i]] = Value(fields[i]);
            }
        }
        if (!reason.empty()) {
            out.rejected.push_back({number, text, reason});
            continue;
        }
        out.rows.push_back(std::move(rec));
    }
    for (const auto& r : out.rejected) spdlog::debug("generated line {} rejected: {}", r.line, r.reason);
    return out;
}

std::vector<Dgr> parse_rules(std::string_view raw, const Schema& schema) {
    static const std::regex prefix(R"(^\s*(?:(?:[-*]|•)\s*|(?:rule\s*)?\d+\s*[:.)]\s*)+)", std::regex::icase);
    std::vector<Dgr> out;
    for (const auto& [number, text] : payload_lines(raw)) {
        std::string body = std::regex_replace(text, prefix, "", std::regex_constants::format_first_only);
        if (body.empty()) continue;
        try {
            Dgr rule = bind_to_schema(schema, parse_dgr(body));
            bool any = std::any_of(rule.clauses().begin(), rule.clauses().end(),
                                   [](const Conjunction& c) { return c.satisfiable(); });
            if (rule.is_identity() || !any) continue;
            if (std::find(out.begin(), out.end(), rule) == out.end()) out.push_back(std::move(rule));
        } catch (const Error& e) {
            spdlog::debug("rule line {} dropped: {}", number, e.what());
        }
    }
    return out;
}

}  // namespace date
