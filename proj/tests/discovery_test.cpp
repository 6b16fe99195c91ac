#include "date/discovery.hpp"
#include "date/error.hpp"
#include "date/fixtures.hpp"
#include "date/rule_io.hpp"

#include <doctest.h>

#include <map>
#include <vector>

using namespace date;

namespace {

Table labelled(const std::vector<double>& a, const std::vector<int>& y) {
    std::string csv = "a,y\n";
    for (std::size_t i = 0; i < a.size(); ++i) csv += format_number(a[i]) + "," + std::to_string(y[i]) + "\n";
    return parse_csv(csv, {"y", Task::Classification, std::nullopt});
}

Table range_table(int n, int ones_below) {
    std::vector<double> a;
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        a.push_back(i);
        y.push_back(i < ones_below ? 1 : 0);
    }
    return labelled(a, y);
}

// y = [a >= 5] on a grid of 0.05, with a contiguous block of flipped labels
// that a depth-1 root tree cannot fit within 5%.
Table noisy_step() {
    std::vector<double> a;
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        double v = i * 0.05;
        a.push_back(v);
        bool flipped = v >= 1.0 && v < 2.0;
        y.push_back((v >= 5.0) != flipped ? 1 : 0);
    }
    return labelled(a, y);
}

}  // namespace

TEST_SUITE("discovery") {

TEST_CASE("sharing index") {
    auto t = range_table(10, 6);
    CHECK(sharing_index(t, {}) == 0.0);

    auto ones = train(range_table(10, 10), {}, "ones");
    std::vector<PoolModel> pool{{ones, 0.05}};
    auto eight = range_table(10, 8);
    CHECK(sharing_index(eight, pool) == doctest::Approx(0.8));

    auto near = train(range_table(10, 7), {}, "near");
    std::vector<PoolModel> two{{ones, 0.05}, {near, 0.05}};
    CHECK(sharing_index(t, two) == doctest::Approx(0.9));
}

TEST_CASE("try share") {
    auto t = range_table(10, 6);
    CHECK_FALSE(try_share(t, {}).has_value());
    auto m = train(t, {}, "a");
    auto twin = train(t, {}, "b");
    std::vector<PoolModel> pool{{m, 0.05}, {twin, 0.05}};
    auto hit = try_share(t, pool);
    REQUIRE(hit.has_value());
    CHECK(hit->index == 0);
    CHECK(hit->error == 0.0);
}

TEST_CASE("required fanout") {
    CHECK(required_fanout(0.8, 10) == 2);
    CHECK(required_fanout(1.0, 10) == 1);
    CHECK(required_fanout(0.0, 7) == 7);
    CHECK(required_fanout(0.95, 10) == 1);
}

TEST_CASE("homogeneous table yields one identity example") {
    auto t = range_table(40, 20);
    DiscoveryConfig cfg;
    auto d = discover(t, cfg);
    REQUIRE(d.examples.size() == 1);
    CHECK(d.examples[0].rule.is_identity());
    CHECK(d.examples[0].data.size() == t.size());
    CHECK(d.examples[0].representative);
    CHECK(d.stats.models_trained == 1);
}

TEST_CASE("noisy step splits into certified examples") {
    auto t = noisy_step();
    DiscoveryConfig cfg;
    cfg.hyper.max_depth = 1;
    auto d = discover(t, cfg);
    CHECK(d.examples.size() >= 2);
    bool near_five = false;
    for (const auto& e : d.examples) {
        const auto& pm = d.model(e.model_id);
        CHECK(acceptance_error(pm.model, e.data) <= pm.rho_m);
        CHECK(filter(t, e.rule).size() >= e.data.size());
        for (const auto& p : e.rule.predicate_set()) {
            if (p.attribute == "a" && p.constant.number() >= 4.0 && p.constant.number() <= 6.0) near_five = true;
        }
    }
    CHECK(near_five);
}

TEST_CASE("discovery is deterministic") {
    auto t = noisy_step();
    DiscoveryConfig cfg;
    cfg.hyper.max_depth = 1;
    auto a = discover(t, cfg);
    auto b = discover(t, cfg);
    REQUIRE(a.examples.size() == b.examples.size());
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
        CHECK(a.examples[i].rule == b.examples[i].rule);
        CHECK(a.examples[i].data.ids() == b.examples[i].data.ids());
    }
}

TEST_CASE("duplicated subpopulation shares a model") {
    auto t = make_fixture("duplicate_markers", 1);
    DiscoveryConfig on;
    on.hyper.max_depth = 1;
    auto off = on;
    off.sharing_on = false;
    auto a = discover(t, on);
    auto b = discover(t, off);
    CHECK(a.stats.shares >= 1);
    CHECK(a.stats.models_trained < b.stats.models_trained);
    CHECK(b.stats.shares == 0);
}

TEST_CASE("one representative per model") {
    auto d = discover(make_fixture("mixture2", 1), DiscoveryConfig{});
    std::map<std::string, int> reps;
    for (const auto& e : d.examples) reps[e.model_id] += e.representative;
    for (const auto& [id, n] : reps) CHECK(n == 1);
}

TEST_CASE("prompt examples") {
    auto t = range_table(30, 10);
    auto e = make_example("m", 0.05, Dgr::identity(), t);
    std::vector<Example> one{e};
    auto all = build_prompt_examples(one, 100, 1);
    REQUIRE(all.size() == 1);
    CHECK(all[0].rows.size() == 30);

    auto three = build_prompt_examples(one, 3, 1);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < three[0].rows.size(); ++i) pos += three[0].rows.target(i).number() == 1.0;
    CHECK(three[0].rows.size() == 3);
    CHECK(pos == 1);
}

}  // TEST_SUITE
