#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace keyhole {

enum class ErrorCode {
  Validation,
  Schema,
  Query,
  Parse,
  Unparseable,
  NeedsSelection,
  Range,
  InvalidDimensionality,
  InvalidTarget,
  Corruption,
  Version,
};

std::string_view to_string(ErrorCode code);

// Base of every error raised by the library. The code drives CLI exit codes
// and the wire-protocol Error payload.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class CorruptionError : public Error {
 public:
  CorruptionError(std::uint64_t seq, const std::string& message)
      : Error(ErrorCode::Corruption, message), seq_(seq) {}

  // Provenance sequence number where the mismatch was detected (0 when the
  // damage is outside the record stream, e.g. a bad header).
  std::uint64_t seq() const noexcept { return seq_; }

 private:
  std::uint64_t seq_;
};

// 0 success, 1 validation-type failures, 2 corruption.
int exit_code(ErrorCode code) noexcept;

}  // namespace keyhole
