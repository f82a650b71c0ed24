#pragma once

// Line-oriented session files.
//
// Snapshot:
//   keyhole-snapshot v1
//   <canonical state JSON>
//   sha256 <hex of the state hash>
//
// Provenance:
//   keyhole-provenance v1
//   {"initial": <canonical state>, "schema": <schema or null>}
//   <one ProvenanceRecord JSON per line>
//   end <record count>
//
// A header naming another version raises Version. Anything missing, cut
// short or failing its hash raises CorruptionError.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "keyhole/session.hpp"

namespace keyhole::store {

inline constexpr std::string_view kSnapshotMagic = "keyhole-snapshot";
inline constexpr std::string_view kProvenanceMagic = "keyhole-provenance";
inline constexpr std::string_view kFormatVersion = "v1";

void write_snapshot(std::ostream& out, const session::SessionState& state);
std::string snapshot_text(const session::SessionState& state);
session::SessionState read_snapshot(std::istream& in);
session::SessionState read_snapshot_text(std::string_view text);

struct ProvenanceFile {
  session::SessionState initial;
  std::optional<data::Schema> schema;
  std::vector<session::ProvenanceRecord> log;
};

void write_provenance(std::ostream& out, const ProvenanceFile& file);
std::string provenance_text(const ProvenanceFile& file);
// Parses and checks the framing; does not replay the log.
ProvenanceFile read_provenance(std::istream& in);
ProvenanceFile read_provenance_text(std::string_view text);

ProvenanceFile export_session(const session::Session& s);

void save(const std::filesystem::path& path, const std::string& text);
std::string load(const std::filesystem::path& path);

}  // namespace keyhole::store
