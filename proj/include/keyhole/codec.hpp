#pragma once

// JSON encodings of data-engine values. Objects use std::map so keys come
// out sorted and dump() is canonical. Decoders throw Validation on
// malformed input.
//
//   Value      null | number | string | bool | {"t": seconds}
//   FilterSpec {"column", "op", "values", "lo", "hi"}
//   QuerySpec  {"aggregate", "filters", "group_by", "target", "time_bucket"}

#include <json.hpp>

#include "keyhole/query.hpp"

namespace keyhole::codec {

using Json = nlohmann::json;

Json encode(const data::Value& v);
data::Value decode_value(const Json& j);

Json encode(const data::FilterSpec& f);
data::FilterSpec decode_filter(const Json& j);

Json encode(const data::QuerySpec& q);
data::QuerySpec decode_query(const Json& j);

Json encode(const data::Schema& schema);
data::Schema decode_schema(const Json& j);

// Typed field access that reports the offending key.
const Json& field(const Json& obj, const char* key);
std::string get_string(const Json& obj, const char* key);
double get_number(const Json& obj, const char* key);
std::int64_t get_int(const Json& obj, const char* key);
bool get_bool(const Json& obj, const char* key);

}  // namespace keyhole::codec
