#include "date/error.hpp"
#include "date/rule_io.hpp"
#include "date/rules.hpp"
#include "gen.hpp"

#include <doctest.h>

#include <set>

using namespace date;

namespace {

Table abt() {
    return parse_csv("a,b,y\n1,9,0\n4,9,1\n6,2,0\n9,3,1\n", {"y", Task::Classification, std::nullopt});
}

Predicate P(const char* attr, Op op, Value c) { return {attr, op, std::move(c)}; }

std::set<RowId> id_set(const Table& t) { return {t.ids().begin(), t.ids().end()}; }

}  // namespace

TEST_SUITE("rules") {

TEST_CASE("satisfies") {
    auto t = abt();
    const auto& s = t.schema();
    Record r1{6.0, 0.0, 0.0};
    CHECK(satisfies(s, r1, Dgr(Conjunction({P("a", Op::Gt, 5.0)}))));
    CHECK(satisfies(s, r1, Dgr::identity()));
    Record r2{4.0, 9.0, 0.0};
    Dgr two({Conjunction({P("a", Op::Gt, 5.0)}), Conjunction({P("b", Op::Gt, 8.0), P("a", Op::Lt, 5.0)})});
    CHECK(satisfies(s, r2, two));
}

TEST_CASE("filter") {
    auto t = abt();
    CHECK(filter(t, Dgr::identity()).size() == 4);
    auto f = filter(t, Dgr(Conjunction({P("a", Op::Gt, 5.0)})));
    CHECK(f.ids() == std::vector<RowId>{2, 3});
    auto none = filter(t, Dgr(Conjunction({P("a", Op::Gt, 5.0), P("a", Op::Lt, 3.0)})));
    CHECK(none.empty());
}

TEST_CASE("refine") {
    Conjunction r({P("a", Op::Gt, 5.0)});
    CHECK(refine(r, P("a", Op::Gt, 7.0)) == Conjunction({P("a", Op::Gt, 7.0)}));
    CHECK_FALSE(refine(r, P("a", Op::Lt, 3.0)).satisfiable());
    CHECK(refine(r, P("a", Op::Ge, 5.0)) == r);
    auto both = refine(Conjunction({P("a", Op::Ge, 5.0)}), P("a", Op::Gt, 5.0));
    CHECK(both == Conjunction({P("a", Op::Gt, 5.0)}));
    CHECK_FALSE(refine(Conjunction({P("a", Op::Ge, 5.0)}), P("a", Op::Lt, 5.0)).satisfiable());
    CHECK(refine(Conjunction({P("a", Op::Ge, 5.0)}), P("a", Op::Le, 5.0)).satisfiable());
}

TEST_CASE("categorical canonical form") {
    Conjunction c({P("c", Op::Eq, "x"), P("c", Op::Ne, "y")});
    CHECK(c == Conjunction({P("c", Op::Eq, "x")}));
    CHECK_FALSE(Conjunction({P("c", Op::Eq, "x"), P("c", Op::Eq, "y")}).satisfiable());
    CHECK_FALSE(Conjunction({P("c", Op::Eq, "x"), P("c", Op::Ne, "x")}).satisfiable());
}

TEST_CASE("refine is order independent") {
    gen::Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        auto t = gen::any_table(rng);
        auto c = gen::conjunction(rng, t, 4);
        auto ps = c.predicates();
        std::reverse(ps.begin(), ps.end());
        CHECK(Conjunction(ps) == c);
    }
}

TEST_CASE("induction subset property") {
    gen::Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        auto t = gen::any_table(rng);
        auto r = gen::conjunction(rng, t);
        auto p = gen::predicate(rng, t);
        auto narrow = id_set(filter(t, Dgr(refine(r, p))));
        auto wide = id_set(filter(t, Dgr(r)));
        CHECK(std::includes(wide.begin(), wide.end(), narrow.begin(), narrow.end()));
    }
}

TEST_CASE("kind rules") {
    auto t = parse_csv("a,c,y\n1,x,0\n", {"y", Task::Classification, std::nullopt});
    CHECK_THROWS_AS(validate_rule(t.schema(), Dgr(Conjunction({P("c", Op::Gt, 1.0)}))), SchemaError);
    CHECK_THROWS_AS(validate_rule(t.schema(), Dgr(Conjunction({P("a", Op::Eq, "x")}))), SchemaError);
    CHECK_THROWS_AS(validate_rule(t.schema(), Dgr(Conjunction({P("y", Op::Gt, 0.0)}))), SchemaError);
    CHECK_THROWS_AS(validate_rule(t.schema(), Dgr(Conjunction({P("zz", Op::Gt, 0.0)}))), SchemaError);
    CHECK_NOTHROW(validate_rule(t.schema(), Dgr(Conjunction({P("a", Op::Gt, 0.0), P("c", Op::Ne, "x")}))));
    auto bound = bind_to_schema(t.schema(), Dgr(Conjunction({P("c", Op::Eq, 3.0)})));
    CHECK(bound.clauses()[0].predicates()[0].constant == Value("3"));
}

TEST_CASE("examples") {
    auto t = abt();
    Dgr r(Conjunction({P("a", Op::Gt, 5.0)}));
    auto e = make_example("m", 0.05, r, filter(t, r));
    CHECK_THROWS_AS(make_example("m", 0.0, r, filter(t, r)), ArgumentError);
    CHECK_THROWS_AS(make_example("m", 0.05, r, empty_like(t)), ArgumentError);
    CHECK_THROWS_AS(make_example("m", 0.05, r, t), ArgumentError);

    auto self = fuse(e, e);
    CHECK(self.data.ids() == e.data.ids());
    CHECK(self.rule == e.rule);

    CHECK(generalize(e, e.rho).rho == e.rho);
    auto g = generalize(e, 0.10);
    CHECK(g.rho == 0.10);
    CHECK(g.rule == e.rule);
    CHECK(g.data.rows() == e.data.rows());
    CHECK_THROWS_AS(generalize(e, 0.01), MonotonicityError);
}

TEST_CASE("fusing complementary rules covers the table") {
    std::string csv = "a,y\n";
    for (int i = 0; i < 10; ++i) csv += std::to_string(i) + ",0\n";
    auto t = parse_csv(csv, {"y", Task::Classification, std::nullopt});
    Dgr r1(Conjunction({P("a", Op::Gt, 5.0)}));
    Dgr r2(Conjunction({P("a", Op::Le, 5.0)}));
    auto f = fuse(make_example("m", 0.05, r1, filter(t, r1)), make_example("m", 0.05, r2, filter(t, r2)));
    CHECK(f.data.size() == 10);
    CHECK(filter(t, f.rule).size() == 10);
}

TEST_CASE("fusion preconditions") {
    auto t = abt();
    Dgr r1(Conjunction({P("a", Op::Gt, 5.0)}));
    Dgr r2(Conjunction({P("a", Op::Gt, 3.0)}));
    auto e1 = make_example("m", 0.05, r1, filter(t, r1));
    auto e2 = make_example("m", 0.08, r2, filter(t, r2));
    CHECK_THROWS_AS(fuse(e1, make_example("n", 0.05, r2, filter(t, r2))), FusionError);
    CHECK_THROWS_AS(fuse(e1, e2), FusionError);
    auto f = fuse(generalize(e1, 0.08), e2);
    CHECK(f.rho == 0.08);
    CHECK(f.data.size() == 3);
}

TEST_CASE("overlap") {
    Dgr r1(Conjunction({P("a", Op::Gt, 5.0), P("b", Op::Lt, 3.0)}));
    Dgr r2(Conjunction({P("a", Op::Gt, 5.0)}));
    Dgr r3(Conjunction({P("c", Op::Eq, "x")}));
    CHECK(overlap(r1, r1) == 1.0);
    CHECK(overlap(r1, r2) == doctest::Approx(0.5));
    CHECK(overlap(r1, r3) == 0.0);
    CHECK(overlap(r1, r2, OverlapMode::Interval) == doctest::Approx(0.5));
    Dgr near(Conjunction({P("a", Op::Gt, 5.5)}));
    double soft = overlap(r2, near, OverlapMode::Interval);
    CHECK(soft > 0.0);
    CHECK(soft < 1.0);
    CHECK(overlap(r2, near) == 0.0);
}

TEST_CASE("diversity") {
    Dgr c(Conjunction({P("a", Op::Gt, 5.0), P("b", Op::Lt, 3.0)}));
    Dgr half(Conjunction({P("a", Op::Gt, 5.0)}));
    Dgr other(Conjunction({P("d", Op::Gt, 1.0)}));
    std::vector<WeightedRule> self{{c, 4.0}};
    CHECK(diversity(c, self) == 1.0);
    std::vector<WeightedRule> ctx{{half, 30.0}, {other, 10.0}};
    CHECK(diversity(c, ctx) == doctest::Approx(0.375));
    std::vector<WeightedRule> disjoint{{other, 5.0}};
    CHECK(diversity(c, disjoint) == 0.0);
}

TEST_CASE("rule text round trip") {
    gen::Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        auto t = gen::any_table(rng);
        auto r = gen::dgr(rng, t);
        auto back = bind_to_schema(t.schema(), parse_dgr(to_text(r)));
        CHECK(back == r);
        CHECK(dgr_from_json(to_json(r)) == r);
    }
}

TEST_CASE("rule text syntax") {
    auto r = parse_dgr("(a > 5 AND b <= 3) OR (c = \"x\")");
    REQUIRE(r.clauses().size() == 2);
    CHECK(to_text(r) == "(a > 5 AND b <= 3) OR (c = \"x\")");
    CHECK(parse_dgr("a > 5 && b <= 3") == parse_dgr("(a > 5 and b <= 3)"));
    CHECK(parse_dgr("a ≥ 2") == parse_dgr("a >= 2"));
    CHECK(to_text(Dgr::identity()) == "TRUE");
    CHECK(parse_dgr("TRUE").is_identity());
    CHECK_THROWS_AS(parse_dgr("a >"), ParseError);
    CHECK_THROWS_AS(parse_dgr("a > 5 AND (b < 2 OR c > 1)"), ParseError);
}

}  // TEST_SUITE
