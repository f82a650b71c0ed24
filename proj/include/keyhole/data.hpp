#pragma once

// Typed columnar datasets. Cells are variants; std::monostate marks a
// missing cell. Values of one column always share the column's type.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace keyhole::data {

enum class ColumnType { Number, String, Timestamp, Boolean };

std::string_view to_string(ColumnType type);
std::optional<ColumnType> parse_column_type(std::string_view text);

// Seconds since 1970-01-01T00:00:00Z.
struct Timestamp {
  std::int64_t seconds = 0;
  auto operator<=>(const Timestamp&) const = default;
};

using Value = std::variant<std::monostate, double, std::string, Timestamp, bool>;

inline bool is_missing(const Value& v) { return std::holds_alternative<std::monostate>(v); }
std::optional<ColumnType> type_of(const Value& v);

// Numeric view used by aggregates: numbers as-is, booleans as 0/1,
// timestamps as seconds. Missing and strings yield nullopt.
std::optional<double> numeric_value(const Value& v);

// Accepts YYYY-MM-DD, optionally followed by 'T' or ' ' and HH:MM or
// HH:MM:SS, optionally suffixed with 'Z'. Nothing else.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

// Shortest round-trip rendering for numbers; empty string for missing.
std::string format_value(const Value& v);

// Interprets text as a literal of the given column type; nullopt if it does
// not parse as that type.
std::optional<Value> coerce(std::string_view text, ColumnType type);

struct ColumnSchema {
  std::string name;
  ColumnType type = ColumnType::String;
  bool operator==(const ColumnSchema&) const = default;
};

using Schema = std::vector<ColumnSchema>;

const ColumnSchema* find_column(const Schema& schema, std::string_view name);

struct Column {
  std::string name;
  ColumnType type = ColumnType::String;
  std::vector<Value> cells;

  std::size_t missing_count() const;
};

class Dataset {
 public:
  Dataset() = default;
  // Validates equal column lengths, unique names and per-cell types.
  explicit Dataset(std::vector<Column> columns);

  std::size_t row_count() const noexcept { return row_count_; }
  std::size_t column_count() const noexcept { return columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  Schema schema() const;

  std::optional<std::size_t> index_of(std::string_view name) const;
  // Throws a Schema error for unknown names.
  const Column& column(std::string_view name) const;
  const Value& cell(std::size_t row, std::size_t col) const { return columns_[col].cells[row]; }

  // Rows in the given order; ids must be < row_count.
  Dataset select_rows(std::span<const std::size_t> rows) const;

 private:
  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
};

// RFC 4180 style: comma delimiter, double-quote escaping, CRLF or LF.
// The first record is the header. Column types are inferred in the order
// number, timestamp, boolean, string over the non-empty cells; empty cells
// become missing. Throws Parse on ragged rows (with the line number) and
// Schema on duplicate header names.
Dataset ingest_csv(std::istream& in);
Dataset ingest_csv_text(std::string_view text);

void write_csv(std::ostream& out, const Dataset& ds);
void write_csv_field(std::ostream& out, std::string_view field);

}  // namespace keyhole::data
