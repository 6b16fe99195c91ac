#include "date/error.hpp"
#include "date/fixtures.hpp"
#include "date/generation.hpp"
#include "date/rule_io.hpp"

#include <doctest.h>

using namespace date;

namespace {

Table cls(const std::string& rows) { return parse_csv("a,y\n" + rows, {"y", Task::Classification, std::nullopt}); }
Table reg(const std::string& rows) { return parse_csv("a,y\n" + rows, {"y", Task::Regression, std::nullopt}); }

std::string step_rows(double lo, double hi, double step, double cut) {
    std::string s;
    for (double a = lo; a < hi; a += step) s += format_number(a) + "," + (a < cut ? "0" : "1") + "\n";
    return s;
}

}  // namespace

TEST_SUITE("generation") {

TEST_CASE("group by path") {
    auto flat = cls("1,1\n2,1\n3,1\n4,1\n");
    auto m0 = train(flat, {});
    auto g0 = group_by_path(m0, flat);
    REQUIRE(g0.size() == 1);
    CHECK(g0[0].path_key == "ROOT");
    CHECK(g0[0].rule.is_identity());

    auto t = cls(step_rows(0, 10, 1, 5));
    auto m = train(t, {});
    auto groups = group_by_path(m, t);
    CHECK(groups.size() == 2);
    for (const auto& g : groups) CHECK(filter(t, g.rule).size() == g.data.size());
}

TEST_CASE("quality filter") {
    auto t = cls(step_rows(0, 10, 1, 5));
    auto m = train(t, {});
    CHECK(quality_filter(m, t, 0.05));
    CHECK_FALSE(quality_filter(m, cls("1,0\n2,1\n"), 0.05));

    auto r = reg("1,0\n2,0\n3,0\n4,0\n");
    auto c = train(r, {});
    CHECK(quality_filter(c, reg("1,4\n2,9\n"), 10.0));
    CHECK_FALSE(quality_filter(c, reg("1,4\n2,11\n"), 10.0));
}

TEST_CASE("delta score") {
    auto base = cls(step_rows(0, 5, 0.5, 2.5));
    auto val = cls(step_rows(0, 10, 0.5, 2.5));
    TreeHyper h;

    CHECK(std::abs(delta_score(h, base, base, base)) <= 1e-12);

    // val covers a region (a >= 5) the train block never saw, labelled 0 there;
    // train ends on label 1, so the tree extrapolates wrong.
    std::string far = step_rows(0, 5, 0.5, 2.5);
    auto val2 = cls(far + "6,0\n7,0\n8,0\n9,0\n");
    auto fill = cls("6,0\n6.5,0\n7,0\n8,0\n9,0\n9.5,0\n");
    CHECK(delta_score(h, base, val2, fill) > 0.0);

    auto flipped = cls("0,1\n0.5,1\n1,1\n1.5,1\n2,1\n0.25,1\n0.75,1\n1.25,1\n1.75,1\n");
    CHECK(delta_score(h, base, val, flipped) < 0.0);
    CHECK_THROWS_AS(delta_score(h, base, empty_like(base), fill), ArgumentError);
}

TEST_CASE("piecewise generation invariants") {
    auto full = make_fixture("piecewise", 1);
    SplitSpec spec;
    spec.ordered = true;
    auto parts = split(full, spec);
    auto d = discover(parts.train, DiscoveryConfig::defaults_for(Task::Regression));
    GenerationConfig cfg;
    cfg.iterations = 1;
    cfg.seed = 1;
    SyntheticBackend backend(parts.train, fixture_oracle("piecewise"));
    auto g = run_generation(d, parts.train, cfg, backend);
    REQUIRE(!g.candidates.empty());
    std::size_t models_with_examples = 0;
    for (const auto& pm : d.models) {
        for (const auto& e : d.examples) {
            if (e.model_id == pm.model.id()) {
                ++models_with_examples;
                break;
            }
        }
    }
    CHECK(g.stats.refine_calls == models_with_examples);
    CHECK(g.stats.generate_calls >= models_with_examples);
    for (const auto& c : g.candidates) {
        const auto& pm = d.model(c.model_id);
        CHECK(filter(c.data, c.rule).size() == c.data.size());
        CHECK(quality_filter(pm.model, c.data, pm.rho_m));
        CHECK(c.rho_k == doctest::Approx(c.rho_m - c.delta));
        CHECK(c.iteration == 1);
        for (auto id : c.data.ids()) CHECK((id & kGeneratedRowBit) != 0);
    }
}

TEST_CASE("config checks") {
    auto t = cls(step_rows(0, 10, 0.5, 5));
    auto d = discover(t, DiscoveryConfig{});
    SyntheticBackend backend(t);
    GenerationConfig cfg;
    cfg.iterations = 0;
    CHECK_THROWS_AS(run_generation(d, t, cfg, backend), ConfigError);
    cfg.iterations = 1;
    cfg.holdout = 1.0;
    CHECK_THROWS_AS(run_generation(d, t, cfg, backend), ConfigError);
    DiscoveryResult empty;
    CHECK_THROWS_AS(run_generation(empty, t, GenerationConfig{}, backend), ArgumentError);
}

TEST_CASE("arm json round trip") {
    auto t = cls(step_rows(0, 10, 0.5, 5));
    ArmCandidate a{"m", 0.05, 0.04, parse_dgr("a > 5"), filter(t, parse_dgr("a > 5")), 0.01, 0.02, 2, 7};
    auto b = arm_from_json(to_json(a), t.schema_ptr());
    CHECK(b.model_id == a.model_id);
    CHECK(b.rule == a.rule);
    CHECK(b.data.rows() == a.data.rows());
    CHECK(b.data.ids() == a.data.ids());
    CHECK(b.delta == a.delta);
    CHECK(b.index == 7);
}

}  // TEST_SUITE
