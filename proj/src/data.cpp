#include "keyhole/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "keyhole/error.hpp"

namespace keyhole::data {

std::string_view to_string(ColumnType type) {
  switch (type) {
    case ColumnType::Number: return "number";
    case ColumnType::String: return "string";
    case ColumnType::Timestamp: return "timestamp";
    case ColumnType::Boolean: return "boolean";
  }
  return "unknown";
}

std::optional<ColumnType> parse_column_type(std::string_view text) {
  if (text == "number") return ColumnType::Number;
  if (text == "string") return ColumnType::String;
  if (text == "timestamp") return ColumnType::Timestamp;
  if (text == "boolean") return ColumnType::Boolean;
  return std::nullopt;
}

std::optional<ColumnType> type_of(const Value& v) {
  switch (v.index()) {
    case 1: return ColumnType::Number;
    case 2: return ColumnType::String;
    case 3: return ColumnType::Timestamp;
    case 4: return ColumnType::Boolean;
    default: return std::nullopt;
  }
}

std::optional<double> numeric_value(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  if (const auto* t = std::get_if<Timestamp>(&v)) return static_cast<double>(t->seconds);
  return std::nullopt;
}

namespace {

bool parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    char c = text[i];
    if (c < '0' || c > '9') return false;
    out = out * 10 + (c - '0');
  }
  return true;
}

std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<bool> parse_bool(std::string_view text) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  std::string l = lower(text);
  if (l == "true") return true;
  if (l == "false") return false;
  return std::nullopt;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0;
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!parse_fixed_int(text, 0, 4, y) || !parse_fixed_int(text, 5, 2, mo) ||
      !parse_fixed_int(text, 8, 2, d))
    return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t secs = static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()) * 86400;

  std::string_view rest = text.substr(10);
  if (rest.empty()) return Timestamp{secs};
  if (rest.front() != 'T' && rest.front() != ' ') return std::nullopt;
  rest.remove_prefix(1);
  if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
  int hh = 0, mm = 0, ss = 0;
  if (rest.size() != 5 && rest.size() != 8) return std::nullopt;
  if (!parse_fixed_int(rest, 0, 2, hh) || rest[2] != ':' || !parse_fixed_int(rest, 3, 2, mm))
    return std::nullopt;
  if (rest.size() == 8 && (rest[5] != ':' || !parse_fixed_int(rest, 6, 2, ss)))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  return Timestamp{secs + hh * 3600 + mm * 60 + ss};
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  std::int64_t days = ts.seconds >= 0 ? ts.seconds / 86400 : -((-ts.seconds + 86399) / 86400);
  std::int64_t rem = ts.seconds - days * 86400;
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  if (rem == 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  }
  return buf;
}

std::string format_value(const Value& v) {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(double d) const {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
      return std::string(buf, ptr);
    }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(Timestamp t) const { return format_timestamp(t); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(Visitor{}, v);
}

std::optional<Value> coerce(std::string_view text, ColumnType type) {
  switch (type) {
    case ColumnType::Number:
      if (auto n = parse_number(text)) return Value{*n};
      return std::nullopt;
    case ColumnType::Timestamp:
      if (auto t = parse_timestamp(text)) return Value{*t};
      return std::nullopt;
    case ColumnType::Boolean:
      if (auto b = parse_bool(text)) return Value{*b};
      return std::nullopt;
    case ColumnType::String:
      return Value{std::string(text)};
  }
  return std::nullopt;
}

const ColumnSchema* find_column(const Schema& schema, std::string_view name) {
  for (const auto& c : schema)
    if (c.name == name) return &c;
  return nullptr;
}

std::size_t Column::missing_count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), is_missing));
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::set<std::string_view> names;
  row_count_ = columns_.empty() ? 0 : columns_.front().cells.size();
  for (const auto& col : columns_) {
    if (!names.insert(col.name).second)
      throw Error(ErrorCode::Schema, "duplicate column name '" + col.name + "'");
    if (col.cells.size() != row_count_)
      throw Error(ErrorCode::Schema, "column '" + col.name + "' has " +
                                         std::to_string(col.cells.size()) + " cells, expected " +
                                         std::to_string(row_count_));
    for (const auto& cell : col.cells) {
      auto t = type_of(cell);
      if (t && *t != col.type)
        throw Error(ErrorCode::Schema, "column '" + col.name + "' holds a " +
                                           std::string(to_string(*t)) + " cell");
    }
  }
}

Schema Dataset::schema() const {
  Schema out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back({c.name, c.type});
  return out;
}

std::optional<std::size_t> Dataset::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  return std::nullopt;
}

const Column& Dataset::column(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw Error(ErrorCode::Schema, "unknown column '" + std::string(name) + "'");
  return columns_[*idx];
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) {
    Column out{c.name, c.type, {}};
    out.cells.reserve(rows.size());
    for (auto r : rows) {
      if (r >= row_count_)
        throw Error(ErrorCode::Validation, "row id " + std::to_string(r) + " out of range");
      out.cells.push_back(c.cells[r]);
    }
    cols.push_back(std::move(out));
  }
  Dataset ds;
  ds.columns_ = std::move(cols);
  ds.row_count_ = rows.size();
  return ds;
}

}  // namespace keyhole::data
