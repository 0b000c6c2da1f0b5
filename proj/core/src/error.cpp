#include "fpref/core/error.hpp"

namespace fpref {

Error::Error(ErrorCategory category, const std::string& what)
    : std::runtime_error(what), category_(category) {}

int exit_code_for(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::kConfig:
      return 2;
    case ErrorCategory::kData:
      return 3;
    case ErrorCategory::kNumerical:
      return 4;
    case ErrorCategory::kRuntime:
      return 1;
  }
  return 1;
}

LayoutMismatch::LayoutMismatch(const std::string& expected,
                               const std::string& actual)
    : Error(ErrorCategory::kConfig,
            "layout mismatch: expected '" + expected + "', got '" + actual +
                "'") {}

NonFiniteResult::NonFiniteResult(const std::string& where)
    : Error(ErrorCategory::kNumerical, "non-finite value produced by " + where) {}

ParseError::ParseError(std::size_t line, const std::string& reason)
    : Error(ErrorCategory::kData,
            "parse error at line " + std::to_string(line) + ": " + reason),
      line_(line) {}

EmptyDataset::EmptyDataset(const std::string& source)
    : Error(ErrorCategory::kData, "empty dataset: " + source) {}

IoError::IoError(const std::string& what) : Error(ErrorCategory::kData, what) {}

ContextOverflow::ContextOverflow(std::size_t needed, std::size_t context_len,
                                 std::optional<std::size_t> item)
    : Error(ErrorCategory::kData,
            "context overflow: sequence needs " + std::to_string(needed) +
                " positions, context holds " + std::to_string(context_len) +
                (item ? " (batch item " + std::to_string(*item) + ")" : "")),
      needed_(needed),
      context_len_(context_len),
      item_(item) {}

OutOfVocabToken::OutOfVocabToken(const std::string& token)
    : Error(ErrorCategory::kData, "out-of-vocabulary token: " + token) {}

InvalidArgument::InvalidArgument(const std::string& what)
    : Error(ErrorCategory::kConfig, what) {}

InvalidConfig::InvalidConfig(const std::string& reason)
    : Error(ErrorCategory::kConfig, "invalid config: " + reason) {}

DpoRequiresPairs::DpoRequiresPairs(const std::string& detail)
    : InvalidConfig("DPO requires chosen/rejected pairs on each client (" +
                    detail + ")") {}

EmptyClient::EmptyClient(const std::string& client_id)
    : Error(ErrorCategory::kData, "client '" + client_id + "' has no examples") {}

EmptyUpdateSet::EmptyUpdateSet()
    : Error(ErrorCategory::kRuntime, "aggregate called with no client updates") {}

NumericalError::NumericalError(std::uint64_t round, const std::string& detail)
    : Error(ErrorCategory::kNumerical,
            "numerical failure in round " + std::to_string(round) + ": " + detail),
      round_(round) {}

EmptyOutputs::EmptyOutputs()
    : Error(ErrorCategory::kData, "no model outputs to score") {}

JudgeUnavailable::JudgeUnavailable(const std::string& judge)
    : Error(ErrorCategory::kRuntime, "judge unavailable: " + judge) {}

DuplicateCell::DuplicateCell(const std::string& cell)
    : Error(ErrorCategory::kData, "duplicate report cell: " + cell) {}

}  // namespace fpref
