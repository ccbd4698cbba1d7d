#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vphm {

enum class Errc {
  MissingColumn,
  EmptyFile,
  AllRecordsInvalid,
  TooShort,
  UnknownFlight,
  UnknownChemistry,
  NonFiniteState,
  Degenerate,
  ShapeMismatch,
  EmptyInput,
  GraphFreed,
  InvalidConfig,
  NonFiniteLoss,
  LengthMismatch,
  InvertedInterval,
  Precondition,
  Format,
  Io,
};

std::string_view to_string(Errc code);

/// Single exception type for every library failure; `code()` identifies the
/// contract that was broken.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

inline void require(bool cond, const std::string &what) {
  if (!cond)
    throw Error(Errc::Precondition, what);
}

} // namespace vphm
