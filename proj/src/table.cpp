#include "date/table.hpp"

#include "date/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace date {

std::string to_string(Kind kind) { return kind == Kind::Numeric ? "numeric" : "categorical"; }

std::string to_string(Task task) {
    return task == Task::Classification ? "classification" : "regression";
}

std::string to_string(Provenance provenance) {
    switch (provenance) {
    case Provenance::Original: return "original";
    case Provenance::Generated: return "generated";
    case Provenance::Mixed: return "mixed";
    }
    return "original";
}

Task task_from_string(const std::string& text) {
    if (text == "classification") return Task::Classification;
    if (text == "regression") return Task::Regression;
    throw ArgumentError("unknown task '" + text + "' (expected classification or regression)");
}

double Value::number() const {
    if (!is_numeric()) throw SchemaError("value '" + std::get<std::string>(v_) + "' is not numeric");
    return std::get<double>(v_);
}

const std::string& Value::token() const {
    if (is_numeric()) throw SchemaError("value " + format_number(std::get<double>(v_)) + " is not categorical");
    return std::get<std::string>(v_);
}

std::string Value::str() const { return is_numeric() ? format_number(number()) : token(); }

std::partial_ordering Value::operator<=>(const Value& other) const {
    if (is_numeric() != other.is_numeric()) {
        return is_numeric() ? std::partial_ordering::less : std::partial_ordering::greater;
    }
    if (is_numeric()) return number() <=> other.number();
    return token() <=> other.token();
}

std::string format_number(double value) {
    if (value == 0.0) return "0";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

std::optional<double> parse_number(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(out)) return std::nullopt;
    return out;
}

// ---------------------------------------------------------------- Schema

Schema::Schema(std::vector<Attribute> attributes, const std::string& target, Task task)
    : attributes_(std::move(attributes)), task_(task) {
    std::set<std::string> seen;
    for (const auto& a : attributes_) {
        if (!seen.insert(a.name).second) throw SchemaError("duplicate attribute name '" + a.name + "'");
    }
    auto idx = index_of(target);
    if (!idx) throw SchemaError("target attribute '" + target + "' is not a column");
    target_ = *idx;
    if (task_ == Task::Regression && attributes_[target_].kind != Kind::Numeric) {
        throw SchemaError("regression requires a numeric target, '" + target + "' is categorical");
    }
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
        if (attributes_[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t Schema::require_index(std::string_view name) const {
    auto idx = index_of(name);
    if (!idx) throw SchemaError("unknown attribute '" + std::string(name) + "'");
    return *idx;
}

void check_record(const Schema& schema, const Record& record) {
    if (record.size() != schema.size()) {
        throw SchemaError("record has " + std::to_string(record.size()) + " values, schema has " +
                          std::to_string(schema.size()));
    }
    for (std::size_t i = 0; i < record.size(); ++i) {
        if (record[i].kind() != schema.attribute(i).kind) {
            throw SchemaError("attribute '" + schema.attribute(i).name + "' expects " +
                              to_string(schema.attribute(i).kind) + " values");
        }
        if (record[i].is_numeric() && !std::isfinite(record[i].number())) {
            throw SchemaError("attribute '" + schema.attribute(i).name + "' holds a non-finite value");
        }
    }
}

// ---------------------------------------------------------------- Table

Table::Table(SchemaPtr schema, std::vector<Record> rows, Provenance provenance, std::vector<RowId> ids)
    : schema_(std::move(schema)), rows_(std::move(rows)), ids_(std::move(ids)), provenance_(provenance) {
    if (!schema_) throw SchemaError("table requires a schema");
    for (const auto& r : rows_) check_record(*schema_, r);
    if (ids_.empty()) {
        ids_.resize(rows_.size());
        const RowId base = provenance_ == Provenance::Generated ? kGeneratedRowBit : 0;
        std::iota(ids_.begin(), ids_.end(), base);
    } else if (ids_.size() != rows_.size()) {
        throw SchemaError("row id count does not match row count");
    }
}

Table Table::select(std::span<const std::size_t> positions) const {
    std::vector<Record> rows;
    std::vector<RowId> ids;
    rows.reserve(positions.size());
    ids.reserve(positions.size());
    for (auto p : positions) {
        rows.push_back(rows_.at(p));
        ids.push_back(ids_.at(p));
    }
    return Table(schema_, std::move(rows), provenance_, std::move(ids));
}

Table Table::with_provenance(Provenance provenance) const {
    return Table(schema_, rows_, provenance, ids_);
}

Table empty_like(const Table& like, Provenance provenance) {
    return Table(like.schema_ptr(), {}, provenance, {});
}

// ---------------------------------------------------------------- CSV

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string quote_csv_field(const std::string& field) {
    bool needs = field.find_first_of(",\"\n\r") != std::string::npos || field.empty() ||
                 std::isspace(static_cast<unsigned char>(field.front())) ||
                 std::isspace(static_cast<unsigned char>(field.back()));
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

namespace {

struct RawRecord {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

// Splits text into records; quoted fields may span physical lines.
std::vector<RawRecord> read_records(std::string_view text) {
    std::vector<RawRecord> out;
    std::size_t line = 1;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t start_line = line;
        std::size_t end = pos;
        bool quoted = false;
        while (end < text.size()) {
            char c = text[end];
            if (c == '"') quoted = !quoted;
            if (c == '\n') {
                if (!quoted) break;
                ++line;
            }
            ++end;
        }
        std::string_view record = text.substr(pos, end - pos);
        if (!record.empty() && record.back() == '\r') record.remove_suffix(1);
        bool blank = std::all_of(record.begin(), record.end(),
                                 [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
        if (!blank) out.push_back({start_line, split_csv_line(record)});
        pos = end + 1;
        ++line;
    }
    return out;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

bool is_missing(const std::string& field) {
    return field.empty() || field == "NA" || field == "NaN" || field == "nan" || field == "?";
}

Task infer_task(const std::vector<std::vector<std::string>>& cells, std::size_t target, Kind kind) {
    if (kind == Kind::Categorical) return Task::Classification;
    std::set<double> distinct;
    for (const auto& row : cells) {
        double v = *parse_number(row[target]);
        if (v != std::floor(v)) return Task::Regression;
        distinct.insert(v);
    }
    return distinct.size() <= 20 ? Task::Classification : Task::Regression;
}

}  // namespace

Table parse_csv(std::string_view text, const LoadOptions& options) {
    auto records = read_records(text);
    if (records.empty()) throw LoadError("empty CSV: no header line");
    std::vector<std::string> header;
    for (auto& h : records.front().fields) header.push_back(trim(h));
    const std::size_t arity = header.size();

    std::vector<std::vector<std::string>> cells;
    std::vector<std::size_t> lines;
    std::size_t skipped = 0;
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto& rec = records[r];
        if (rec.fields.size() != arity) {
            throw LoadError("line " + std::to_string(rec.line) + ": expected " + std::to_string(arity) +
                            " fields, found " + std::to_string(rec.fields.size()));
        }
        for (auto& f : rec.fields) f = trim(f);
        if (std::any_of(rec.fields.begin(), rec.fields.end(), is_missing)) {
            ++skipped;
            continue;
        }
        cells.push_back(std::move(rec.fields));
        lines.push_back(rec.line);
    }
    if (skipped > 0) spdlog::warn("load_csv: rejected {} row(s) with missing values", skipped);
    if (cells.empty()) throw LoadError("CSV has a header but no usable data rows");

    std::vector<Attribute> attrs;
    if (options.schema_hint) {
        const auto& hint = *options.schema_hint;
        if (hint.size() != arity) throw SchemaError("schema hint arity does not match the CSV header");
        for (std::size_t i = 0; i < arity; ++i) {
            if (hint.attribute(i).name != header[i]) {
                throw SchemaError("schema hint column '" + hint.attribute(i).name + "' does not match header '" +
                                  header[i] + "'");
            }
        }
        attrs = hint.attributes();
    } else {
        for (std::size_t c = 0; c < arity; ++c) {
            bool numeric = std::all_of(cells.begin(), cells.end(),
                                       [&](const auto& row) { return parse_number(row[c]).has_value(); });
            attrs.push_back({header[c], numeric ? Kind::Numeric : Kind::Categorical});
        }
    }

    std::string target = options.target;
    if (target.empty() && options.schema_hint) target = options.schema_hint->target_name();
    std::optional<std::size_t> target_idx;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (attrs[i].name == target) target_idx = i;
    }
    if (!target_idx) throw SchemaError("target column '" + target + "' is absent from the CSV header");

    Task task = options.task ? *options.task
                : options.schema_hint ? options.schema_hint->task()
                                      : infer_task(cells, *target_idx, attrs[*target_idx].kind);
    auto schema = std::make_shared<const Schema>(std::move(attrs), target, task);

    std::vector<Record> rows;
    rows.reserve(cells.size());
    for (std::size_t r = 0; r < cells.size(); ++r) {
        Record rec;
        rec.reserve(arity);
        for (std::size_t c = 0; c < arity; ++c) {
            if (schema->attribute(c).kind == Kind::Numeric) {
                auto v = parse_number(cells[r][c]);
                if (!v) {
                    throw LoadError("line " + std::to_string(lines[r]) + ": column '" + schema->attribute(c).name +
                                    "' expects a number, found '" + cells[r][c] + "'");
                }
                rec.emplace_back(*v);
            } else {
                rec.emplace_back(cells[r][c]);
            }
        }
        rows.push_back(std::move(rec));
    }
    return Table(schema, std::move(rows), Provenance::Original);
}

Table load_csv(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), options);
}

std::string to_csv(const Table& table) {
    std::string out;
    const auto& attrs = table.schema().attributes();
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (i) out += ',';
        out += quote_csv_field(attrs[i].name);
    }
    out += '\n';
    for (const auto& row : table.rows()) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i].is_numeric() ? format_number(row[i].number()) : quote_csv_field(row[i].token());
        }
        out += '\n';
    }
    return out;
}

void write_csv(const Table& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write '" + path.string() + "'");
    out << to_csv(table);
}

// ---------------------------------------------------------------- apportion

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights,
                                   std::span<const std::size_t> caps) {
    const std::size_t k = weights.size();
    if (!caps.empty() && caps.size() != k) throw ArgumentError("apportion: caps size mismatch");
    auto cap = [&](std::size_t i) { return caps.empty() ? total : caps[i]; };
    std::size_t capacity = 0;
    for (std::size_t i = 0; i < k; ++i) capacity += cap(i);
    if (k == 0 || capacity < total) throw ArgumentError("apportion: not enough capacity");

    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> out(k, 0);
    std::vector<double> frac(k, 0.0);
    std::size_t given = 0;
    for (std::size_t i = 0; i < k; ++i) {
        double quota = sum > 0 ? static_cast<double>(total) * weights[i] / sum : 0.0;
        auto fl = static_cast<std::size_t>(std::floor(quota + 1e-12));
        out[i] = std::min(fl, cap(i));
        frac[i] = quota - static_cast<double>(fl);
        given += out[i];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
    for (auto i : order) {
        if (given == total) break;
        if (out[i] < cap(i)) {
            ++out[i];
            ++given;
        }
    }
    for (std::size_t i = 0; given < total; i = (i + 1) % k) {
        if (out[i] < cap(i)) {
            ++out[i];
            ++given;
        }
    }
    return out;
}

// ---------------------------------------------------------------- split / sample

namespace {

// Positions grouped by target class, classes in Value order.
std::vector<std::vector<std::size_t>> class_groups(const Table& t) {
    std::map<Value, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < t.size(); ++i) groups[t.target(i)].push_back(i);
    std::vector<std::vector<std::size_t>> out;
    for (auto& [_, g] : groups) out.push_back(std::move(g));
    return out;
}

std::vector<std::vector<std::size_t>> quartile_groups(const Table& t) {
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return t.target(a).number() < t.target(b).number(); });
    const std::vector<double> equal(4, 1.0);
    auto sizes = apportion(order.size(), equal);
    std::vector<std::vector<std::size_t>> out;
    std::size_t at = 0;
    for (auto s : sizes) {
        if (s == 0) continue;
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(at + s));
        at += s;
    }
    return out;
}

}  // namespace

SplitResult split(const Table& table, const SplitSpec& spec) {
    if (spec.train_frac <= 0 || spec.val_frac <= 0 || spec.test_frac <= 0 ||
        std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9) {
        throw ArgumentError("split fractions must be positive and sum to 1");
    }
    const std::size_t n = table.size();
    if (n < 5) throw SplitError("split needs at least 5 rows, table has " + std::to_string(n));
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.train_frac));
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.val_frac));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
        throw SplitError("a split fraction rounds to zero rows on a table of " + std::to_string(n));
    }

    std::mt19937_64 rng(spec.seed);
    std::vector<std::size_t> train, val, test;

    auto groups = table.schema().task() == Task::Classification && !spec.ordered ? class_groups(table)
                                                                : std::vector<std::vector<std::size_t>>{};
    bool stratify = !groups.empty() &&
                    std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.size() >= 3; });
    if (stratify) {
        std::vector<double> sizes;
        std::vector<std::size_t> caps;
        for (auto& g : groups) {
            std::shuffle(g.begin(), g.end(), rng);
            sizes.push_back(static_cast<double>(g.size()));
            caps.push_back(g.size());
        }
        auto tr = apportion(n_train, sizes, caps);
        for (std::size_t c = 0; c < caps.size(); ++c) caps[c] -= tr[c];
        auto va = apportion(n_val, sizes, caps);
        for (std::size_t c = 0; c < groups.size(); ++c) {
            const auto& g = groups[c];
            train.insert(train.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(tr[c]));
            val.insert(val.end(), g.begin() + static_cast<std::ptrdiff_t>(tr[c]),
                       g.begin() + static_cast<std::ptrdiff_t>(tr[c] + va[c]));
            test.insert(test.end(), g.begin() + static_cast<std::ptrdiff_t>(tr[c] + va[c]), g.end());
        }
    } else {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        if (!spec.ordered) std::shuffle(all.begin(), all.end(), rng);
        train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
        val.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                   all.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), all.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    std::sort(test.begin(), test.end());
    return {table.select(train), table.select(val), table.select(test)};
}

Table stratified_sample(const Table& table, std::size_t n, std::uint64_t seed) {
    if (n < 1 || n > table.size()) {
        throw ArgumentError("stratified_sample: n=" + std::to_string(n) + " outside [1, " +
                            std::to_string(table.size()) + "]");
    }
    auto groups = table.schema().task() == Task::Classification ? class_groups(table) : quartile_groups(table);
    std::vector<double> sizes;
    std::vector<std::size_t> caps;
    for (const auto& g : groups) {
        sizes.push_back(static_cast<double>(g.size()));
        caps.push_back(g.size());
    }
    auto counts = apportion(n, sizes, caps);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> picked;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        auto g = groups[c];
        std::shuffle(g.begin(), g.end(), rng);
        picked.insert(picked.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(counts[c]));
    }
    std::sort(picked.begin(), picked.end());
    return table.select(picked);
}

Table union_of(const Table& a, const Table& b) {
    if (!(a.schema() == b.schema())) throw SchemaError("union of tables with different schemas");
    Provenance p = a.provenance();
    if (a.empty()) p = b.provenance();
    else if (!b.empty() && a.provenance() != b.provenance()) p = Provenance::Mixed;
    std::vector<Record> rows = a.rows();
    rows.insert(rows.end(), b.rows().begin(), b.rows().end());
    std::vector<RowId> ids = a.ids();
    ids.insert(ids.end(), b.ids().begin(), b.ids().end());
    return Table(a.schema_ptr(), std::move(rows), p, std::move(ids));
}

}  // namespace date
