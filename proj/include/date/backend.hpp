#pragma once

#include "date/prompt.hpp"
#include "date/table.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace date {

struct GenerateRequest {
    std::vector<PromptExample> examples;
    std::size_t count = 20;
    std::uint64_t seed = 0;
    /// When set, every new row must satisfy this rule.
    std::optional<Dgr> focus;
};

struct RefineRequest {
    std::vector<PromptExample> examples;
    std::vector<RuleFeedback> feedback;
    std::size_t max_rules = 3;
    std::uint64_t seed = 0;
};

/// Produces records and proposes rules. Implementations write a transcript of
/// every call when a transcript directory is configured, so runs can be replayed.
class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    virtual std::string name() const = 0;
    virtual std::vector<Record> generate(const Schema& schema, const GenerateRequest& req) = 0;
    virtual std::vector<Dgr> refine_rules(const Schema& schema, const RefineRequest& req) = 0;
};

/// Writes numbered call transcripts: NNNN_<kind>.json with prompt and response.
class TranscriptLog {
public:
    explicit TranscriptLog(std::filesystem::path dir = {});
    bool enabled() const { return !dir_.empty(); }
    void write(const std::string& kind, const std::string& backend, const std::string& prompt,
               const std::string& response);

private:
    std::filesystem::path dir_;
    std::size_t next_ = 1;
};

/// Offline oracle. Samples uniformly inside each rule clause's hyper-rectangle
/// (open sides clipped to the observed ranges), draws free categoricals from
/// the example rows, and labels rows with `label` or the nearest example row.
class SyntheticBackend : public GeneratorBackend {
public:
    using Labeler = std::function<Value(const Record&)>;

    /// `reference` supplies the observed attribute ranges; when empty, the
    /// ranges come from the example rows of each request.
    explicit SyntheticBackend(std::optional<Table> reference = std::nullopt, Labeler label = {},
                              std::filesystem::path transcripts = {});

    std::string name() const override { return "synthetic"; }
    std::vector<Record> generate(const Schema& schema, const GenerateRequest& req) override;
    /// Proposes the rules of the best positive-gain groups.
    std::vector<Dgr> refine_rules(const Schema& schema, const RefineRequest& req) override;

private:
    std::optional<Table> reference_;
    Labeler label_;
    TranscriptLog log_;
    PromptConfig prompt_;
};

/// HTTP transport used by the LLM backend; swapped out in tests.
using Transport = std::function<std::string(const std::string& body)>;

struct LlmOptions {
    std::string endpoint;
    std::string api_key;
    std::string model = "gpt-4o-mini";
    double temperature = 0.7;
    int max_tokens = 2048;
    int retries = 3;
    std::vector<std::chrono::milliseconds> backoff = {std::chrono::seconds(1), std::chrono::seconds(2),
                                                      std::chrono::seconds(4)};
    PromptConfig prompt;

    /// Reads DATE_LLM_ENDPOINT and DATE_LLM_API_KEY; nullopt when no endpoint is set.
    static std::optional<LlmOptions> from_env();
};

/// Chat-completion client. Retries transport failures, then throws BackendError.
class LlmBackend : public GeneratorBackend {
public:
    explicit LlmBackend(LlmOptions options, std::filesystem::path transcripts = {}, Transport transport = {});

    std::string name() const override { return "llm"; }
    std::vector<Record> generate(const Schema& schema, const GenerateRequest& req) override;
    std::vector<Dgr> refine_rules(const Schema& schema, const RefineRequest& req) override;

    /// Request body in chat-completion shape.
    std::string request_body(const std::string& prompt) const;
    /// Extracts choices[0].message.content.
    static std::string response_text(const std::string& body);

private:
    std::string complete(const std::string& kind, const std::string& prompt);

    LlmOptions options_;
    TranscriptLog log_;
    Transport transport_;
};

/// Serves recorded responses in call order; never touches the network.
class ReplayBackend : public GeneratorBackend {
public:
    explicit ReplayBackend(const std::filesystem::path& transcripts, std::filesystem::path record_to = {});

    std::string name() const override { return "replay"; }
    std::vector<Record> generate(const Schema& schema, const GenerateRequest& req) override;
    std::vector<Dgr> refine_rules(const Schema& schema, const RefineRequest& req) override;

    std::size_t remaining() const { return entries_.size() - next_; }

private:
    std::string next_response(const std::string& kind);

    struct Entry {
        std::string kind;
        std::string backend;
        std::string prompt;
        std::string response;
    };
    std::vector<Entry> entries_;
    std::size_t next_ = 0;
    TranscriptLog log_;
};

/// HTTPS (or plain HTTP) POST via cpp-httplib.
Transport http_transport(const std::string& endpoint, const std::string& api_key);

}  // namespace date
