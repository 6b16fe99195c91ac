#include "date/error.hpp"
#include "date/table.hpp"
#include "gen.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

using namespace date;

namespace {

Table two_class(std::size_t a, std::size_t b) {
    std::string csv = "x,y\n";
    for (std::size_t i = 0; i < a; ++i) csv += std::to_string(i) + ",A\n";
    for (std::size_t i = 0; i < b; ++i) csv += std::to_string(a + i) + ",B\n";
    return parse_csv(csv, {"y", std::nullopt, std::nullopt});
}

std::map<std::string, std::size_t> class_counts(const Table& t) {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < t.size(); ++i) ++out[t.target(i).token()];
    return out;
}

}  // namespace

TEST_SUITE("table") {

TEST_CASE("csv inference") {
    auto t = parse_csv("a,b,y\n1,x,0\n2,x,1\n", {"y", std::nullopt, std::nullopt});
    CHECK(t.size() == 2);
    CHECK(t.schema().attribute(0).kind == Kind::Numeric);
    CHECK(t.schema().attribute(1).kind == Kind::Categorical);
    CHECK(t.schema().task() == Task::Classification);
    CHECK(t.row(1)[0].number() == 2.0);
}

TEST_CASE("arity error names the line") {
    try {
        parse_csv("a,b,y\n1,x,0\n2,x\n", {"y", std::nullopt, std::nullopt});
        FAIL("expected LoadError");
    } catch (const LoadError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("missing target column") {
    CHECK_THROWS_AS(parse_csv("a,b\n1,2\n", {"y", std::nullopt, std::nullopt}), SchemaError);
}

TEST_CASE("quoted fields") {
    auto f = split_csv_line(R"(1,"a,b","say ""hi""")");
    REQUIRE(f.size() == 3);
    CHECK(f[1] == "a,b");
    CHECK(f[2] == "say \"hi\"");
    CHECK(split_csv_line(quote_csv_field("x,\"y\""))[0] == "x,\"y\"");
}

TEST_CASE("csv round trip") {
    auto t = parse_csv("a,b,y\n0.1,2,3.5\n1e-7,4,1\n-3,5,2.25\n7,0.3333333333333333,8\n9,10,11.5\n12,13,14\n",
                       {"y", Task::Regression, std::nullopt});
    auto dir = std::filesystem::temp_directory_path() / "date_table_rt";
    std::filesystem::create_directories(dir);
    write_csv(t, dir / "t.csv");
    auto back = load_csv(dir / "t.csv", {"y", Task::Regression, std::nullopt});
    CHECK(back.schema() == t.schema());
    CHECK(back.rows() == t.rows());
    CHECK(to_csv(back) == to_csv(t));
}

TEST_CASE("random tables round trip") {
    gen::Rng rng(11);
    for (int i = 0; i < 30; ++i) {
        auto t = gen::any_table(rng);
        auto back = parse_csv(to_csv(t), {"y", t.schema().task(), t.schema()});
        CHECK(back.rows() == t.rows());
    }
}

TEST_CASE("number formatting is shortest round trip") {
    for (double v : {0.1, 1.0 / 3.0, 1e300, -2.5, 123456789.0}) {
        CHECK(*parse_number(format_number(v)) == v);
    }
    CHECK(format_number(2.0) == "2");
    CHECK_FALSE(parse_number("abc").has_value());
}

TEST_CASE("split sizes and determinism") {
    auto t = two_class(5, 5);
    SplitSpec spec{0.6, 0.2, 0.2, 7};
    auto a = split(t, spec);
    CHECK(a.train.size() == 6);
    CHECK(a.val.size() == 2);
    CHECK(a.test.size() == 2);
    auto b = split(t, spec);
    CHECK(a.train.ids() == b.train.ids());
    CHECK(a.test.ids() == b.test.ids());
    std::set<RowId> all;
    for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(part->ids().begin(), part->ids().end());
    CHECK(all.size() == 10);
}

TEST_CASE("stratified split keeps class ratios") {
    auto t = two_class(80, 20);
    auto s = split(t, {0.6, 0.2, 0.2, 3});
    auto c = class_counts(s.train);
    CHECK(c["A"] == 48);
    CHECK(c["B"] == 12);
}

TEST_CASE("ordered split keeps file order") {
    auto t = two_class(8, 2);
    SplitSpec spec{0.6, 0.2, 0.2, 1};
    spec.ordered = true;
    auto s = split(t, spec);
    CHECK(s.train.ids() == std::vector<RowId>{0, 1, 2, 3, 4, 5});
    CHECK(s.test.ids() == std::vector<RowId>{8, 9});
}

TEST_CASE("split rejects bad fractions and tiny tables") {
    auto t = two_class(5, 5);
    CHECK_THROWS_AS(split(t, {0.5, 0.2, 0.2, 1}), ArgumentError);
    CHECK_THROWS_AS(split(two_class(2, 2), {0.6, 0.2, 0.2, 1}), SplitError);
}

TEST_CASE("stratified sample") {
    auto t = two_class(90, 10);
    auto c = class_counts(stratified_sample(t, 10, 5));
    CHECK(c["A"] == 9);
    CHECK(c["B"] == 1);
    CHECK(stratified_sample(t, t.size(), 5).size() == t.size());
    CHECK_THROWS_AS(stratified_sample(t, 0, 5), ArgumentError);
}

TEST_CASE("regression sample takes one row per quartile") {
    std::string csv = "x,y\n";
    for (int i = 1; i <= 100; ++i) csv += std::to_string(i) + "," + std::to_string(i) + ".5\n";
    auto t = parse_csv(csv, {"y", Task::Regression, std::nullopt});
    auto s = stratified_sample(t, 4, 9);
    std::vector<int> bins;
    for (std::size_t i = 0; i < s.size(); ++i) bins.push_back(static_cast<int>(s.target(i).number() - 1) / 25);
    std::sort(bins.begin(), bins.end());
    CHECK(bins == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("union") {
    auto t = two_class(3, 0);
    auto e = empty_like(t);
    CHECK(union_of(t, e).rows() == t.rows());
    auto g = two_class(2, 0).with_provenance(Provenance::Generated);
    auto u = union_of(t, g);
    CHECK(u.size() == 5);
    CHECK(u.provenance() == Provenance::Mixed);
}

TEST_CASE("apportion") {
    std::vector<double> w{1, 1};
    CHECK(apportion(100, w) == std::vector<std::size_t>{50, 50});
    std::vector<double> w3{0.9, 0.1};
    CHECK(apportion(10, w3) == std::vector<std::size_t>{9, 1});
    std::vector<std::size_t> caps{3, 100};
    CHECK(apportion(10, w, caps) == std::vector<std::size_t>{3, 7});
}

}  // TEST_SUITE
