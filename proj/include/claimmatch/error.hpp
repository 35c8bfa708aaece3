#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace claimmatch {

enum class ErrorCode {
  AllPartsEmpty,
  InsufficientPool,
  EmptyCorpus,
  InvalidInput,
  UnknownTemplate,
  ShotLeak,
  MissingSystemTemplate,
  ConfigError,
  ProviderError,
  TranscriptMismatch,
  ContextOverflow,
  EmptyText,
  DimMismatch,
  ZeroVector,
  EmptyValidation,
  ModelMismatch,
  IdMismatch,
  DuplicateId,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AllPartsEmpty: return "AllPartsEmpty";
    case ErrorCode::InsufficientPool: return "InsufficientPool";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::ShotLeak: return "ShotLeak";
    case ErrorCode::MissingSystemTemplate: return "MissingSystemTemplate";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::TranscriptMismatch: return "TranscriptMismatch";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyValidation: return "EmptyValidation";
    case ErrorCode::ModelMismatch: return "ModelMismatch";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
  }
  return "Unknown";
}

/// Process exit status for an error, as used by the command-line tool:
/// 2 configuration, 3 provider failure, 4 data validation.
inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownTemplate:
    case ErrorCode::MissingSystemTemplate:
    case ErrorCode::ModelMismatch:
      return 2;
    case ErrorCode::ProviderError:
    case ErrorCode::TranscriptMismatch:
      return 3;
    default:
      return 4;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  int exit_code() const noexcept { return claimmatch::exit_code(code_); }

 private:
  ErrorCode code_;
};

}  // namespace claimmatch
