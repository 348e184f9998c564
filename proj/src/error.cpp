#include "vtreid/error.hpp"

namespace vtreid {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::EmptySpec: return "EmptySpec";
    case Errc::OddCount: return "OddCount";
    case Errc::DegenerateColumn: return "DegenerateColumn";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::EmptyGalleryAfterFilter: return "EmptyGalleryAfterFilter";
    case Errc::NoRelevant: return "NoRelevant";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::ModeDataMismatch: return "ModeDataMismatch";
    case Errc::ParseError: return "ParseError";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::DimInconsistent: return "DimInconsistent";
    case Errc::BadSpec: return "BadSpec";
    case Errc::IoError: return "IoError";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace vtreid
