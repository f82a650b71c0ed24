#include "keyhole/codec.hpp"

#include <cmath>

#include "keyhole/error.hpp"

namespace keyhole::codec {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::Validation, what); }

}  // namespace

const Json& field(const Json& obj, const char* key) {
  if (!obj.is_object()) bad(std::string("expected an object holding '") + key + "'");
  auto it = obj.find(key);
  if (it == obj.end()) bad(std::string("missing field '") + key + "'");
  return *it;
}

std::string get_string(const Json& obj, const char* key) {
  const Json& j = field(obj, key);
  if (!j.is_string()) bad(std::string("field '") + key + "' must be a string");
  return j.get<std::string>();
}

double get_number(const Json& obj, const char* key) {
  const Json& j = field(obj, key);
  if (!j.is_number()) bad(std::string("field '") + key + "' must be a number");
  return j.get<double>();
}

std::int64_t get_int(const Json& obj, const char* key) {
  const Json& j = field(obj, key);
  if (!j.is_number_integer()) bad(std::string("field '") + key + "' must be an integer");
  return j.get<std::int64_t>();
}

bool get_bool(const Json& obj, const char* key) {
  const Json& j = field(obj, key);
  if (!j.is_boolean()) bad(std::string("field '") + key + "' must be a boolean");
  return j.get<bool>();
}

Json encode(const data::Value& v) {
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>)
          return nullptr;
        else if constexpr (std::is_same_v<T, data::Timestamp>)
          return Json{{"t", x.seconds}};
        else
          return x;
      },
      v);
}

data::Value decode_value(const Json& j) {
  if (j.is_null()) return {};
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) {
    double d = j.get<double>();
    if (!std::isfinite(d)) bad("non-finite number");
    return d;
  }
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object() && j.size() == 1 && j.contains("t")) return data::Timestamp{get_int(j, "t")};
  bad("unrecognised value encoding");
}

Json encode(const data::FilterSpec& f) {
  Json values = Json::array();
  for (const auto& v : f.values) values.push_back(encode(v));
  return Json{{"column", f.column},
              {"op", std::string(data::to_string(f.op))},
              {"values", std::move(values)},
              {"lo", encode(f.lo)},
              {"hi", encode(f.hi)}};
}

data::FilterSpec decode_filter(const Json& j) {
  data::FilterSpec f;
  f.column = get_string(j, "column");
  auto op = data::parse_filter_op(get_string(j, "op"));
  if (!op) bad("unknown filter op");
  f.op = *op;
  const Json& values = field(j, "values");
  if (!values.is_array()) bad("filter values must be an array");
  for (const auto& v : values) f.values.push_back(decode_value(v));
  f.lo = decode_value(field(j, "lo"));
  f.hi = decode_value(field(j, "hi"));
  return f;
}

Json encode(const data::QuerySpec& q) {
  Json filters = Json::array();
  for (const auto& f : q.filters) filters.push_back(encode(f));
  return Json{{"aggregate", std::string(data::to_string(q.aggregate))},
              {"filters", std::move(filters)},
              {"group_by", q.group_by},
              {"target", q.target ? Json(*q.target) : Json(nullptr)},
              {"time_bucket",
               q.time_bucket ? Json(std::string(data::to_string(*q.time_bucket))) : Json(nullptr)}};
}

data::QuerySpec decode_query(const Json& j) {
  data::QuerySpec q;
  auto agg = data::parse_aggregate(get_string(j, "aggregate"));
  if (!agg) bad("unknown aggregate");
  q.aggregate = *agg;
  const Json& filters = field(j, "filters");
  if (!filters.is_array()) bad("query filters must be an array");
  for (const auto& f : filters) q.filters.push_back(decode_filter(f));
  const Json& group = field(j, "group_by");
  if (!group.is_array()) bad("group_by must be an array");
  for (const auto& g : group) {
    if (!g.is_string()) bad("group_by entries must be strings");
    q.group_by.push_back(g.get<std::string>());
  }
  const Json& target = field(j, "target");
  if (!target.is_null()) q.target = get_string(j, "target");
  const Json& bucket = field(j, "time_bucket");
  if (!bucket.is_null()) {
    auto b = data::parse_time_bucket(get_string(j, "time_bucket"));
    if (!b) bad("unknown time bucket");
    q.time_bucket = *b;
  }
  return q;
}

Json encode(const data::Schema& schema) {
  Json out = Json::array();
  for (const auto& c : schema)
    out.push_back(Json{{"name", c.name}, {"type", std::string(data::to_string(c.type))}});
  return out;
}

data::Schema decode_schema(const Json& j) {
  if (!j.is_array()) bad("schema must be an array");
  data::Schema out;
  for (const auto& c : j) {
    auto type = data::parse_column_type(get_string(c, "type"));
    if (!type) bad("unknown column type");
    out.push_back({get_string(c, "name"), *type});
  }
  return out;
}

}  // namespace keyhole::codec
