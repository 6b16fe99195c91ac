#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace date {

enum class Kind { Numeric, Categorical };
enum class Task { Classification, Regression };
enum class Provenance { Original, Generated, Mixed };

std::string to_string(Kind kind);
std::string to_string(Task task);
std::string to_string(Provenance provenance);
Task task_from_string(const std::string& text);

/// A single cell: a numeric scalar or an interned categorical token.
class Value {
public:
    Value() = default;
    Value(double number) : v_(number) {}
    Value(int number) : v_(static_cast<double>(number)) {}
    Value(std::string token) : v_(std::move(token)) {}
    Value(const char* token) : v_(std::string(token)) {}

    bool is_numeric() const { return std::holds_alternative<double>(v_); }
    double number() const;
    const std::string& token() const;
    Kind kind() const { return is_numeric() ? Kind::Numeric : Kind::Categorical; }

    /// Shortest round-trip text for numbers, the raw token otherwise.
    std::string str() const;

    bool operator==(const Value&) const = default;
    std::partial_ordering operator<=>(const Value& other) const;

private:
    std::variant<double, std::string> v_{0.0};
};

/// Formats a double with the shortest representation that parses back exactly.
std::string format_number(double value);
std::optional<double> parse_number(std::string_view text);

struct Attribute {
    std::string name;
    Kind kind = Kind::Numeric;
    bool operator==(const Attribute&) const = default;
};

class Schema {
public:
    Schema(std::vector<Attribute> attributes, const std::string& target, Task task);

    const std::vector<Attribute>& attributes() const { return attributes_; }
    std::size_t size() const { return attributes_.size(); }
    const Attribute& attribute(std::size_t i) const { return attributes_.at(i); }
    std::size_t target_index() const { return target_; }
    const std::string& target_name() const { return attributes_[target_].name; }
    Task task() const { return task_; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    /// Throws SchemaError when the attribute is unknown.
    std::size_t require_index(std::string_view name) const;

    bool operator==(const Schema&) const = default;

private:
    std::vector<Attribute> attributes_;
    std::size_t target_ = 0;
    Task task_ = Task::Classification;
};

using SchemaPtr = std::shared_ptr<const Schema>;
using Record = std::vector<Value>;
using RowId = std::uint64_t;

/// Ids with this bit set belong to rows that were never part of a loaded file.
inline constexpr RowId kGeneratedRowBit = RowId{1} << 63;

/// Checks arity and per-column kinds; throws SchemaError on mismatch.
void check_record(const Schema& schema, const Record& record);

/// Immutable record set over a schema. Every row carries a stable id so
/// derived tables (filters, splits, samples) can be traced back to the source.
class Table {
public:
    Table(SchemaPtr schema, std::vector<Record> rows, Provenance provenance,
          std::vector<RowId> ids = {});

    const Schema& schema() const { return *schema_; }
    const SchemaPtr& schema_ptr() const { return schema_; }
    Provenance provenance() const { return provenance_; }

    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const std::vector<Record>& rows() const { return rows_; }
    const Record& row(std::size_t i) const { return rows_.at(i); }
    const std::vector<RowId>& ids() const { return ids_; }
    RowId id(std::size_t i) const { return ids_.at(i); }
    const Value& target(std::size_t i) const { return rows_.at(i)[schema_->target_index()]; }

    /// Rows at the given positions, in the given order.
    Table select(std::span<const std::size_t> positions) const;
    Table with_provenance(Provenance provenance) const;

private:
    SchemaPtr schema_;
    std::vector<Record> rows_;
    std::vector<RowId> ids_;
    Provenance provenance_ = Provenance::Original;
};

/// Empty table sharing the schema of `like`.
Table empty_like(const Table& like, Provenance provenance = Provenance::Original);

struct LoadOptions {
    std::string target;
    std::optional<Task> task;
    /// Overrides inference entirely when present.
    std::optional<Schema> schema_hint;
};

Table load_csv(const std::filesystem::path& path, const LoadOptions& options);
Table parse_csv(std::string_view text, const LoadOptions& options);
std::string to_csv(const Table& table);
void write_csv(const Table& table, const std::filesystem::path& path);

/// Splits one CSV line into fields (RFC-4180 quoting).
std::vector<std::string> split_csv_line(std::string_view line);
std::string quote_csv_field(const std::string& field);

struct SplitSpec {
    double train_frac = 0.6;
    double val_frac = 0.2;
    double test_frac = 0.2;
    std::uint64_t seed = 0;
    /// Take the blocks in file order instead of shuffling.
    bool ordered = false;
};

struct SplitResult {
    Table train;
    Table val;
    Table test;
};

SplitResult split(const Table& table, const SplitSpec& spec);

Table stratified_sample(const Table& table, std::size_t n, std::uint64_t seed);

/// Rows of `a` followed by rows of `b`.
Table union_of(const Table& a, const Table& b);

/// Largest-remainder apportionment of `total` over `weights`, never giving a
/// slot more than `caps[i]` when caps are supplied.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights,
                                   std::span<const std::size_t> caps = {});

}  // namespace date
