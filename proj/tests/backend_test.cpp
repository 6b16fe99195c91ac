#include "date/backend.hpp"
#include "date/error.hpp"
#include "date/rule_io.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <thread>

using namespace date;
namespace fs = std::filesystem;

namespace {

Table grid() {
    std::string csv = "a,b,y\n";
    for (int i = 0; i <= 10; ++i) csv += std::to_string(i) + "," + (i % 2 ? "u" : "v") + "," + (i > 5 ? "1" : "0") + "\n";
    return parse_csv(csv, {"y", Task::Classification, std::nullopt});
}

PromptExample example(const Table& t, const std::string& rule) {
    auto r = parse_dgr(rule);
    return {"m", r, filter(t, r), 0.5, true};
}

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

std::string chat_reply(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

// Serves chat completions on a local port; the first `failures` requests get a 500.
struct MockServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> calls{0};

    MockServer(int failures, std::string content) {
        server.Post("/v1/chat/completions", [this, failures, content](const httplib::Request& req, httplib::Response& res) {
            int n = calls++;
            if (n < failures) {
                res.status = 500;
                return;
            }
            auto body = nlohmann::json::parse(req.body);
            CHECK(body.at("messages").size() == 2);
            res.set_content(chat_reply(content), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~MockServer() {
        server.stop();
        thread.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

LlmOptions fast_options(const std::string& endpoint) {
    LlmOptions o;
    o.endpoint = endpoint;
    o.retries = 2;
    o.backoff = {std::chrono::milliseconds(1)};
    return o;
}

}  // namespace

TEST_SUITE("backend") {

TEST_CASE("synthetic rows stay inside the rule rectangle") {
    auto t = grid();
    SyntheticBackend b(t);
    GenerateRequest req{{example(t, "a > 5 AND a < 7")}, 50, 3, std::nullopt};
    auto rows = b.generate(t.schema(), req);
    CHECK(rows.size() == 50);
    for (const auto& r : rows) {
        CHECK(r[0].number() > 5.0);
        CHECK(r[0].number() < 7.0);
        check_record(t.schema(), r);
    }
}

TEST_CASE("unsatisfiable rule gives no rows") {
    auto t = grid();
    SyntheticBackend b(t);
    GenerateRequest req{{example(t, "a > 5")}, 10, 1, parse_dgr("a > 5 AND a < 2")};
    CHECK(b.generate(t.schema(), req).empty());
}

TEST_CASE("rows are split evenly across rules") {
    auto t = grid();
    SyntheticBackend b(t);
    GenerateRequest req{{example(t, "a > 7"), example(t, "a < 3")}, 100, 2, std::nullopt};
    auto rows = b.generate(t.schema(), req);
    REQUIRE(rows.size() == 100);
    std::size_t high = 0;
    for (const auto& r : rows) high += r[0].number() > 7.0;
    CHECK(high == 50);
}

TEST_CASE("labeler and nearest neighbour") {
    auto t = grid();
    SyntheticBackend oracle(t, [](const Record& r) { return Value(r[0].number() > 9 ? 1.0 : 0.0); });
    GenerateRequest req{{example(t, "a > 5")}, 30, 4, std::nullopt};
    for (const auto& r : oracle.generate(t.schema(), req)) CHECK(r[2] == Value(r[0].number() > 9 ? 1.0 : 0.0));

    SyntheticBackend nearest(t);
    for (const auto& r : nearest.generate(t.schema(), req)) CHECK(r[2] == Value(1.0));
}

TEST_CASE("synthetic generation is seeded") {
    auto t = grid();
    SyntheticBackend a(t), b(t);
    GenerateRequest req{{example(t, "a > 2")}, 20, 9, std::nullopt};
    auto first = a.generate(t.schema(), req);
    CHECK(first == b.generate(t.schema(), req));
    req.seed = 10;
    CHECK(a.generate(t.schema(), req) != first);
}

TEST_CASE("synthetic refine proposes the best positive groups") {
    auto t = grid();
    SyntheticBackend b(t);
    RefineRequest req{{example(t, "a > 5")},
                      {{parse_dgr("a > 8"), 0.1, 3}, {parse_dgr("a < 1"), -0.2, 3}, {parse_dgr("a > 6"), 0.3, 3}},
                      3,
                      0};
    auto rules = b.refine_rules(t.schema(), req);
    REQUIRE(rules.size() == 2);
    CHECK(rules[0] == parse_dgr("a > 6"));
    CHECK(rules[1] == parse_dgr("a > 8"));
}

TEST_CASE("transcripts replay to the same rows") {
    auto t = grid();
    auto dir = fresh_dir("date_transcripts");
    SyntheticBackend b(t, {}, dir);
    GenerateRequest req{{example(t, "a > 5")}, 12, 5, std::nullopt};
    RefineRequest rreq{{example(t, "a > 5")}, {{parse_dgr("a > 8"), 0.1, 3}}, 3, 0};
    auto rows = b.generate(t.schema(), req);
    auto rules = b.refine_rules(t.schema(), rreq);
    CHECK(fs::exists(dir / "0001_generate.json"));
    CHECK(fs::exists(dir / "0002_refine.json"));

    auto again = fresh_dir("date_transcripts_again");
    ReplayBackend r(dir, again);
    CHECK(r.remaining() == 2);
    CHECK(r.generate(t.schema(), req) == rows);
    CHECK(r.refine_rules(t.schema(), rreq) == rules);
    CHECK_THROWS_AS(r.generate(t.schema(), req), BackendError);
    CHECK(fs::exists(again / "0002_refine.json"));
}

TEST_CASE("replay checks call kinds") {
    auto t = grid();
    auto dir = fresh_dir("date_transcripts_kind");
    SyntheticBackend b(t, {}, dir);
    b.generate(t.schema(), GenerateRequest{{example(t, "a > 5")}, 4, 5, std::nullopt});
    ReplayBackend r(dir);
    CHECK_THROWS_AS(r.refine_rules(t.schema(), RefineRequest{}), BackendError);
    CHECK_THROWS_AS(ReplayBackend("/nonexistent/dir"), ConfigError);
}

TEST_CASE("llm request and response shape") {
    LlmBackend b(fast_options("http://localhost:1"), {}, [](const std::string&) { return std::string{}; });
    auto body = nlohmann::json::parse(b.request_body("hello"));
    CHECK(body.at("messages").at(1).at("content") == "hello");
    CHECK(body.at("model") == "gpt-4o-mini");
    CHECK(LlmBackend::response_text(chat_reply("x")) == "x");
    CHECK_THROWS_AS(LlmBackend::response_text("{}"), BackendError);
}

TEST_CASE("llm retries with an injected transport") {
    auto t = grid();
    int calls = 0;
    Transport flaky = [&](const std::string&) -> std::string {
        if (++calls < 3) throw BackendError("boom");
        return chat_reply("```csv\na,b,y\n6,u,1\n7,v,1\n```");
    };
    auto dir = fresh_dir("date_llm_transcripts");
    LlmBackend b(fast_options("http://unused"), dir, flaky);
    auto rows = b.generate(t.schema(), GenerateRequest{{example(t, "a > 5")}, 2, 0, std::nullopt});
    CHECK(rows.size() == 2);
    CHECK(calls == 3);
    CHECK(fs::exists(dir / "0001_generate.json"));

    Transport dead = [](const std::string&) -> std::string { throw BackendError("down"); };
    LlmBackend d(fast_options("http://unused"), {}, dead);
    CHECK_THROWS_AS(d.generate(t.schema(), GenerateRequest{{example(t, "a > 5")}, 2, 0, std::nullopt}), BackendError);
}

TEST_CASE("llm over http against a local server") {
    auto t = grid();
    MockServer server(2, "Sure.\n```csv\na,b,y\n8,u,1\n9,v,1\n10,u,1\n```");
    auto dir = fresh_dir("date_http_transcripts");
    auto opts = fast_options(server.endpoint());
    LlmBackend b(opts, dir, http_transport(opts.endpoint, "key"));
    auto rows = b.generate(t.schema(), GenerateRequest{{example(t, "a > 5")}, 3, 0, std::nullopt});
    CHECK(rows.size() == 3);
    CHECK(server.calls == 3);

    ReplayBackend r(dir);
    CHECK(r.generate(t.schema(), GenerateRequest{}) == rows);
}

TEST_CASE("malformed endpoint") { CHECK_THROWS_AS(http_transport("ftp:/x", ""), ConfigError); }

}  // TEST_SUITE
