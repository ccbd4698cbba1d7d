#include "vphm/error.hpp"

namespace vphm {

std::string_view to_string(Errc code) {
  switch (code) {
  case Errc::MissingColumn: return "MissingColumn";
  case Errc::EmptyFile: return "EmptyFile";
  case Errc::AllRecordsInvalid: return "AllRecordsInvalid";
  case Errc::TooShort: return "TooShort";
  case Errc::UnknownFlight: return "UnknownFlight";
  case Errc::UnknownChemistry: return "UnknownChemistry";
  case Errc::NonFiniteState: return "NonFiniteState";
  case Errc::Degenerate: return "Degenerate";
  case Errc::ShapeMismatch: return "ShapeMismatch";
  case Errc::EmptyInput: return "EmptyInput";
  case Errc::GraphFreed: return "GraphFreed";
  case Errc::InvalidConfig: return "InvalidConfig";
  case Errc::NonFiniteLoss: return "NonFiniteLoss";
  case Errc::LengthMismatch: return "LengthMismatch";
  case Errc::InvertedInterval: return "InvertedInterval";
  case Errc::Precondition: return "Precondition";
  case Errc::Format: return "Format";
  case Errc::Io: return "Io";
  }
  return "Unknown";
}

} // namespace vphm
