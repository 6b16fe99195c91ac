#pragma once

#include "date/discovery.hpp"
#include "date/rules.hpp"
#include "date/table.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace date {

/// Placeholders: {rules} {examples} {count} {format}.
extern const char* const kDefaultGenerateTemplate;
/// Placeholders: {rules} {examples} {feedback} {count}.
extern const char* const kDefaultRefineTemplate;

struct PromptConfig {
    std::string generate_template = kDefaultGenerateTemplate;
    std::string refine_template = kDefaultRefineTemplate;
    /// Rough budget in tokens, estimated as ceil(chars / 4).
    std::size_t token_budget = 6000;
};

std::string load_template(const std::filesystem::path& path);

struct Prompt {
    std::string text;
    /// Sample rows kept per rule after budget truncation.
    std::size_t rows_per_rule = 0;
};

std::size_t estimate_tokens(std::string_view text);

/// Renders the generation prompt. `focus`, when set, is a rule every new row
/// must satisfy and is listed first.
Prompt render_prompt(const Schema& schema, std::span<const PromptExample> examples, std::size_t count,
                     const PromptConfig& cfg, const std::optional<Dgr>& focus = std::nullopt);

struct RuleFeedback {
    Dgr rule;
    double delta = 0.0;
    std::size_t rows = 0;
};

Prompt render_refine_prompt(const Schema& schema, std::span<const PromptExample> examples,
                            std::span<const RuleFeedback> feedback, std::size_t max_rules, const PromptConfig& cfg);

struct RejectedLine {
    std::size_t line = 0;
    std::string text;
    std::string reason;
};

struct ParsedRows {
    std::vector<Record> rows;
    std::vector<RejectedLine> rejected;
};

/// Pulls CSV rows out of free text. Fenced blocks win when present; header
/// lines are skipped (and may reorder columns); malformed lines are rejected
/// with a reason instead of failing the call.
ParsedRows parse_generated(std::string_view raw, const Schema& schema);

/// One rule per line in the plain-text DGR syntax; bullets and numbering are
/// tolerated. Rules that do not parse, constrain the target, or cannot match
/// any row are dropped.
std::vector<Dgr> parse_rules(std::string_view raw, const Schema& schema);

}  // namespace date
