#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace fpref {

// Broad failure classes; the CLI maps these onto process exit codes.
enum class ErrorCategory {
  kConfig,     // exit 2
  kData,       // exit 3
  kNumerical,  // exit 4
  kRuntime,    // exit 1
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what);
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

int exit_code_for(ErrorCategory category) noexcept;

class LayoutMismatch : public Error {
 public:
  LayoutMismatch(const std::string& expected, const std::string& actual);
};

class NonFiniteResult : public Error {
 public:
  explicit NonFiniteResult(const std::string& where);
};

// `line` is 1-based, matching what an editor shows.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyDataset : public Error {
 public:
  explicit EmptyDataset(const std::string& source);
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what);
};

class ContextOverflow : public Error {
 public:
  ContextOverflow(std::size_t needed, std::size_t context_len,
                  std::optional<std::size_t> item = std::nullopt);
  std::optional<std::size_t> item() const noexcept { return item_; }
  std::size_t needed() const noexcept { return needed_; }
  std::size_t context_len() const noexcept { return context_len_; }

 private:
  std::size_t needed_;
  std::size_t context_len_;
  std::optional<std::size_t> item_;
};

class OutOfVocabToken : public Error {
 public:
  explicit OutOfVocabToken(const std::string& token);
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what);
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& reason);
};

// DPO needs chosen/rejected pairs co-located on one client. Split or
// redistributed feedback data cannot provide them.
class DpoRequiresPairs : public InvalidConfig {
 public:
  explicit DpoRequiresPairs(const std::string& detail);
};

class EmptyClient : public Error {
 public:
  explicit EmptyClient(const std::string& client_id);
};

class EmptyUpdateSet : public Error {
 public:
  EmptyUpdateSet();
};

class NumericalError : public Error {
 public:
  NumericalError(std::uint64_t round, const std::string& detail);
  std::uint64_t round() const noexcept { return round_; }

 private:
  std::uint64_t round_;
};

class EmptyOutputs : public Error {
 public:
  EmptyOutputs();
};

class JudgeUnavailable : public Error {
 public:
  explicit JudgeUnavailable(const std::string& judge);
};

class DuplicateCell : public Error {
 public:
  explicit DuplicateCell(const std::string& cell);
};

}  // namespace fpref
