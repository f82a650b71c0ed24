#include "keyhole/store.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "keyhole/error.hpp"

namespace keyhole::store {

namespace {

using codec::Json;

[[noreturn]] void corrupt(const std::string& what, std::uint64_t seq = 0) { throw CorruptionError(seq, what); }

// Splits "magic version" and checks both parts.
void check_header(const std::string& line, std::string_view magic, const char* kind) {
  if (line.rfind(magic, 0) != 0 || line.size() <= magic.size() || line[magic.size()] != ' ')
    corrupt(std::string("not a keyhole ") + kind + " file");
  const std::string version = line.substr(magic.size() + 1);
  if (version != kFormatVersion)
    throw Error(ErrorCode::Version, std::string(kind) + " file version '" + version + "' is not supported; expected " +
                                        std::string(kFormatVersion));
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

Json parse_line(const std::string& line, const char* what, std::uint64_t seq = 0) {
  Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded()) corrupt(std::string("malformed ") + what, seq);
  return j;
}

}  // namespace

void write_snapshot(std::ostream& out, const session::SessionState& state) {
  out << kSnapshotMagic << ' ' << kFormatVersion << '\n'
      << session::canonical_text(state) << '\n'
      << "sha256 " << session::compute_hash(state) << '\n';
}

std::string snapshot_text(const session::SessionState& state) {
  std::ostringstream out;
  write_snapshot(out, state);
  return out.str();
}

session::SessionState read_snapshot(std::istream& in) {
  std::string header, body, trailer;
  if (!next_line(in, header)) corrupt("empty snapshot file");
  check_header(header, kSnapshotMagic, "snapshot");
  if (!next_line(in, body) || !next_line(in, trailer)) corrupt("snapshot file is truncated");
  if (trailer.rfind("sha256 ", 0) != 0) corrupt("snapshot hash line is missing");
  session::SessionState s;
  try {
    s = session::decode_state(parse_line(body, "snapshot state"));
  } catch (const CorruptionError&) {
    throw;
  } catch (const Error& e) {
    corrupt(std::string("snapshot state is invalid: ") + e.what());
  }
  if (s.state_hash != trailer.substr(7)) corrupt("snapshot hash does not match its state");
  return s;
}

session::SessionState read_snapshot_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_snapshot(in);
}

void write_provenance(std::ostream& out, const ProvenanceFile& f) {
  out << kProvenanceMagic << ' ' << kFormatVersion << '\n';
  Json head{{"initial", session::canonical_json(f.initial)},
            {"schema", f.schema ? codec::encode(*f.schema) : Json(nullptr)}};
  out << head.dump() << '\n';
  for (const auto& r : f.log) out << session::encode(r).dump() << '\n';
  out << "end " << f.log.size() << '\n';
}

std::string provenance_text(const ProvenanceFile& f) {
  std::ostringstream out;
  write_provenance(out, f);
  return out.str();
}

ProvenanceFile read_provenance(std::istream& in) {
  std::string line;
  if (!next_line(in, line)) corrupt("empty provenance file");
  check_header(line, kProvenanceMagic, "provenance");
  if (!next_line(in, line)) corrupt("provenance file is truncated before its initial state");

  ProvenanceFile f;
  try {
    Json head = parse_line(line, "provenance head");
    f.initial = session::decode_state(codec::field(head, "initial"));
    const Json& schema = codec::field(head, "schema");
    if (!schema.is_null()) f.schema = codec::decode_schema(schema);
  } catch (const CorruptionError&) {
    throw;
  } catch (const Error& e) {
    corrupt(std::string("provenance head is invalid: ") + e.what());
  }

  bool ended = false;
  while (next_line(in, line)) {
    if (line.rfind("end ", 0) == 0) {
      const std::string count = line.substr(4);
      if (count != std::to_string(f.log.size())) corrupt("provenance record count does not match its trailer");
      ended = true;
      break;
    }
    const std::uint64_t expect = f.log.empty() ? 1 : f.log.back().seq + 1;
    try {
      f.log.push_back(session::decode_record(parse_line(line, "provenance record", expect)));
    } catch (const CorruptionError&) {
      throw;
    } catch (const Error& e) {
      corrupt("provenance record " + std::to_string(expect) + " is invalid: " + e.what(), expect);
    }
  }
  if (!ended) corrupt("provenance file is truncated", f.log.empty() ? 0 : f.log.back().seq + 1);
  if (next_line(in, line) && !line.empty()) corrupt("data after provenance trailer");
  return f;
}

ProvenanceFile read_provenance_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_provenance(in);
}

ProvenanceFile export_session(const session::Session& s) { return {s.initial(), s.schema(), s.log()}; }

void save(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Validation, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Validation, "write to " + path.string() + " failed");
}

std::string load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Validation, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace keyhole::store
