#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vtreid {

enum class Errc {
  ZeroVector,
  EmptyInput,
  NonFiniteEvaluation,
  NonFinite,
  DimMismatch,
  ShapeMismatch,
  NotNormalized,
  EmptySpec,
  OddCount,
  DegenerateColumn,
  TooFewSamples,
  EmptyGalleryAfterFilter,
  NoRelevant,
  EmptyDataset,
  ModeDataMismatch,
  ParseError,
  DuplicateId,
  DimInconsistent,
  BadSpec,
  IoError,
  VersionMismatch,
  ChecksumMismatch,
  InvalidConfig,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vtreid
