#include "date/fixtures.hpp"

#include "date/error.hpp"
#include "date/seed.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace date {

namespace {

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

SchemaPtr numeric_schema(std::vector<std::string> names, const std::string& target, Task task) {
    std::vector<Attribute> attrs;
    for (auto& n : names) attrs.push_back({std::move(n), Kind::Numeric});
    return std::make_shared<const Schema>(std::move(attrs), target, task);
}

// Uniform on [lo, hi] with the open band (gap_lo, gap_hi) removed.
double gapped(std::mt19937_64& rng, double lo, double hi, double gap_lo, double gap_hi) {
    std::uniform_real_distribution<double> u(lo, hi - (gap_hi - gap_lo));
    double v = u(rng);
    return v > gap_lo ? v + (gap_hi - gap_lo) : v;
}

double piecewise_step(double x) {
    if (x < 2.0) return 0.0;
    if (x < 4.0) return 5.0;
    if (x < 6.0) return 2.0;
    if (x < 8.0) return 8.0;
    if (x >= 8.5 && x < 9.5) return 9.0;
    return 3.0;
}

Table piecewise(std::uint64_t seed) {
    auto schema = numeric_schema({"x", "z", "y"}, "y", Task::Regression);
    std::mt19937_64 rng(mix_seed(seed, {1}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> rare(8.5, 9.5);
    std::vector<Record> rows;
    const std::size_t n_train = 900, n_rest = 600;
    for (std::size_t i = 0; i < n_train; ++i) {
        double x = round3(gapped(rng, 0.0, 10.0, 8.5, 9.5));
        if (x >= 8.5 && x < 9.5) x = 8.499;
        rows.push_back({x, round3(unit(rng)), piecewise_step(x)});
    }
    for (std::size_t i = 0; i < n_rest; ++i) {
        double x = i % 4 == 0 ? rare(rng) : gapped(rng, 0.0, 10.0, 8.5, 9.5);
        x = round3(x);
        rows.push_back({x, round3(unit(rng)), piecewise_step(x)});
    }
    // val and test blocks get the same mix; shuffle inside the tail only
    std::shuffle(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end(), rng);
    return Table(schema, std::move(rows), Provenance::Original);
}

int mixture_label(const Record& r) {
    double x1 = r[0].number(), x2 = r[1].number(), x8 = r[7].number();
    return x8 < 0.0 ? (x1 > x2 ? 1 : 0) : (x1 + x2 > 0.0 ? 1 : 0);
}

Table mixture2(std::uint64_t seed) {
    auto schema = numeric_schema({"x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "y"}, "y", Task::Classification);
    std::mt19937_64 rng(mix_seed(seed, {2}));
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Record> rows;
    const std::size_t per_cluster = 500;
    for (double center : {-3.0, 3.0}) {
        std::size_t want[2] = {per_cluster / 2, per_cluster - per_cluster / 2};
        while (want[0] + want[1] > 0) {
            Record r;
            for (int d = 0; d < 7; ++d) r.push_back(round3(g(rng)));
            double x8 = round3(center + g(rng));
            if ((center < 0) != (x8 < 0)) continue;
            r.push_back(x8);
            r.push_back(0.0);
            int y = mixture_label(r);
            if (want[y] == 0) continue;
            --want[y];
            r[8] = static_cast<double>(y);
            rows.push_back(std::move(r));
        }
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    return Table(schema, std::move(rows), Provenance::Original);
}

// Group A and its copy A2 follow y = [x1 > 0.2] and are flagged by two
// disjoint marker columns; group B (twice as large, no marker) follows the
// opposite rule, so x1 alone carries no signal over the whole table.
Table duplicate_markers(std::uint64_t seed) {
    auto schema = numeric_schema({"marker1", "marker2", "x1", "x2", "y"}, "y", Task::Classification);
    std::mt19937_64 rng(mix_seed(seed, {3}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Record> rows;
    const std::size_t n = 100;
    for (std::size_t i = 0; i < n; ++i) {
        double x1 = round3(gapped(rng, 0.0, 1.0, 0.17, 0.23));
        double x2 = round3(unit(rng));
        double y = x1 > 0.2 ? 1.0 : 0.0;
        rows.push_back({1.0, 0.0, x1, x2, y});
        rows.push_back({0.0, 1.0, x1, x2, y});
    }
    for (std::size_t i = 0; i < 2 * n; ++i) {
        double x1 = round3(gapped(rng, 0.0, 1.0, 0.17, 0.23));
        rows.push_back({0.0, 0.0, x1, round3(unit(rng)), x1 > 0.2 ? 0.0 : 1.0});
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    return Table(schema, std::move(rows), Provenance::Original);
}

// greedy_trap geometry: background label [x1 < 0.5] on x1 <= 0.95, and two
// pockets at x1 = 0.99 whose true label is 1 but whose train rows say 0.
constexpr double kPocketX1 = 0.99;
constexpr double kPocketR = 0.99;
constexpr double kPocketS = 0.6;

Table trap_table(const SchemaPtr& schema, std::mt19937_64& rng, std::size_t background, std::size_t r_rows,
                 std::size_t s_rows, double pocket_label, RowId first_id) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Record> rows;
    for (std::size_t i = 0; i < background; ++i) {
        double x1 = round3(gapped(rng, 0.0, 0.95, 0.45, 0.55));
        rows.push_back({x1, round3(unit(rng)), x1 < 0.5 ? 1.0 : 0.0});
    }
    for (std::size_t i = 0; i < r_rows; ++i) rows.push_back({kPocketX1, kPocketR, pocket_label});
    for (std::size_t i = 0; i < s_rows; ++i) rows.push_back({kPocketX1, kPocketS, pocket_label});
    std::vector<RowId> ids(rows.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = first_id + i;
    return Table(schema, std::move(rows), Provenance::Original, std::move(ids));
}

Conjunction pocket_rule(bool upper) {
    return Conjunction({{"x1", Op::Gt, 0.97}, {"x2", upper ? Op::Gt : Op::Le, 0.8}});
}

}  // namespace

std::vector<std::string> fixture_names() { return {"piecewise", "greedy_trap", "duplicate_markers", "mixture2"}; }

Table make_fixture(const std::string& name, std::uint64_t seed) {
    if (name == "piecewise") return piecewise(seed);
    if (name == "mixture2") return mixture2(seed);
    if (name == "duplicate_markers") return duplicate_markers(seed);
    if (name == "greedy_trap") {
        auto g = greedy_trap_instance(seed);
        return union_of(union_of(g.train, g.val), g.heldout);
    }
    throw ArgumentError("unknown fixture '" + name + "'");
}

std::string fixture_target(const std::string& name) {
    for (const auto& n : fixture_names()) {
        if (n == name) return "y";
    }
    throw ArgumentError("unknown fixture '" + name + "'");
}

bool fixture_ordered(const std::string& name) {
    fixture_target(name);
    return name == "piecewise" || name == "greedy_trap";
}

SyntheticBackend::Labeler fixture_oracle(const std::string& name) {
    if (name == "piecewise") return [](const Record& r) { return Value(piecewise_step(r[0].number())); };
    if (name == "mixture2") return [](const Record& r) { return Value(mixture_label(r)); };
    if (name == "duplicate_markers") {
        return [](const Record& r) {
            bool marked = r[0].number() > 0.5 || r[1].number() > 0.5;
            return Value((r[2].number() > 0.2) == marked ? 1.0 : 0.0);
        };
    }
    if (name == "greedy_trap") {
        return [](const Record& r) {
            double x1 = r[0].number();
            return Value(x1 > 0.97 || x1 < 0.5 ? 1.0 : 0.0);
        };
    }
    throw ArgumentError("unknown fixture '" + name + "'");
}

GreedyTrap greedy_trap_instance(std::uint64_t seed) {
    auto schema = numeric_schema({"x1", "x2", "y"}, "y", Task::Classification);
    std::mt19937_64 rng(mix_seed(seed, {4}));
    Table train = trap_table(schema, rng, 200, 4, 2, 0.0, 0);
    Table val = trap_table(schema, rng, 100, 10, 5, 1.0, 100000);
    Table heldout = trap_table(schema, rng, 100, 10, 5, 1.0, 200000);

    std::vector<std::size_t> r_pos;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train.row(i)[1].number() == kPocketR && train.row(i)[0].number() == kPocketX1) r_pos.push_back(i);
    }
    GreedyTrap out{train, val, heldout, {}, {}};
    out.context.push_back(make_example("m0", 0.05, Dgr(pocket_rule(true)), train.select(r_pos), 0.5));

    const double rho_m = 0.05;
    RowId next = kGeneratedRowBit;
    auto arm = [&](bool upper, std::size_t index) {
        double x2 = upper ? kPocketR : kPocketS;
        std::vector<Record> rows(3, Record{kPocketX1, x2, 1.0});
        std::vector<RowId> ids;
        for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back(next++);
        ArmCandidate c{"m0", rho_m, rho_m, Dgr(pocket_rule(upper)),
                       Table(schema, std::move(rows), Provenance::Generated, std::move(ids))};
        TreeHyper hyper;
        hyper.seed = seed;
        c.delta = delta_score(hyper, train, val, c.data);
        c.delta_in_sample = c.delta;
        c.rho_k = rho_m - c.delta;
        c.iteration = 1;
        c.index = index;
        return c;
    };
    out.arms.push_back(arm(true, 0));
    out.arms.push_back(arm(false, 1));
    out.arms.push_back(arm(true, 2));
    return out;
}

}  // namespace date
