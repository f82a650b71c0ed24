#include <iterator>
#include <sstream>

#include "keyhole/data.hpp"
#include "keyhole/error.hpp"

namespace keyhole::data {

namespace {

struct Record {
  std::vector<std::string> fields;
  std::vector<bool> quoted;
  std::size_t line = 0;
};

// Splits the whole input into records. Quoted fields may span lines.
std::vector<Record> split_records(std::string_view text) {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool record_open = false;
  std::size_t line = 1;
  current.line = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    current.quoted.push_back(field_quoted);
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = Record{};
    record_open = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (!record_open) {
      current.line = line;
      record_open = true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw Error(ErrorCode::Parse,
                      "line " + std::to_string(line) + ": quote inside unquoted field");
        in_quotes = true;
        field_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field.push_back(c);
    }
  }
  if (in_quotes) throw Error(ErrorCode::Parse, "line " + std::to_string(current.line) + ": unterminated quote");
  if (record_open) end_record();

  // A lone empty line carries no data.
  std::erase_if(records, [](const Record& r) {
    return r.fields.size() == 1 && r.fields[0].empty() && !r.quoted[0];
  });
  return records;
}

ColumnType infer_type(const std::vector<std::string>& cells, const std::vector<bool>& present) {
  for (ColumnType candidate : {ColumnType::Number, ColumnType::Timestamp, ColumnType::Boolean}) {
    bool all = true;
    bool any = false;
    for (std::size_t i = 0; i < cells.size() && all; ++i) {
      if (!present[i]) continue;
      any = true;
      all = coerce(cells[i], candidate).has_value();
    }
    if (all && any) return candidate;
  }
  return ColumnType::String;
}

}  // namespace

Dataset ingest_csv_text(std::string_view text) {
  auto records = split_records(text);
  if (records.empty()) throw Error(ErrorCode::Parse, "line 1: missing header row");

  const Record& header = records.front();
  const std::size_t width = header.fields.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].fields.size() != width)
      throw Error(ErrorCode::Parse, "line " + std::to_string(records[r].line) + ": expected " +
                                        std::to_string(width) + " fields, found " +
                                        std::to_string(records[r].fields.size()));
  }

  std::vector<Column> columns;
  columns.reserve(width);
  for (std::size_t c = 0; c < width; ++c) {
    std::vector<std::string> raw;
    std::vector<bool> present;
    raw.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
      raw.push_back(records[r].fields[c]);
      present.push_back(!records[r].fields[c].empty() || records[r].quoted[c]);
    }
    Column col{header.fields[c], infer_type(raw, present), {}};
    col.cells.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
      col.cells.push_back(present[i] ? *coerce(raw[i], col.type) : Value{});
    columns.push_back(std::move(col));
  }
  return Dataset(std::move(columns));
}

Dataset ingest_csv(std::istream& in) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return ingest_csv_text(text);
}

void write_csv_field(std::ostream& out, std::string_view field) {
  bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

void write_csv(std::ostream& out, const Dataset& ds) {
  const auto& cols = ds.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out << ',';
    write_csv_field(out, cols[c].name);
  }
  out << '\n';
  for (std::size_t r = 0; r < ds.row_count(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ',';
      write_csv_field(out, format_value(cols[c].cells[r]));
    }
    out << '\n';
  }
}

}  // namespace keyhole::data
