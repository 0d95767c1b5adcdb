// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace kprune {

enum class Errc {
  ZeroMatrix,
  NumericalFailure,
  NotSquare,
  RankDeficient,
  ShapeMismatch,
  NonFinite,
  TooFewSnapshots,
  NoUnitEigenvalue,
  NoDecayingModes,
  LengthMismatch,
  UnequalCompression,
  InvalidArgument,
  Io,
  Config,
};

const char* errc_name(Errc code) noexcept;

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace kprune
