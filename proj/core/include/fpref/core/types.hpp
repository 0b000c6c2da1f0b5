#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace fpref {

enum class Label { kDesirable, kUndesirable };

// "desirable" / "undesirable"
std::string_view to_string(Label label) noexcept;
// Throws InvalidArgument on anything other than the two lowercase names.
Label label_from_string(std::string_view text);

struct PreferencePair {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::string client_id;
  std::size_t source_index = 0;

  bool operator==(const PreferencePair&) const = default;
};

struct FeedbackExample {
  std::string prompt;
  std::string response;
  Label label = Label::kDesirable;
  std::string client_id;
  std::size_t source_index = 0;

  bool operator==(const FeedbackExample&) const = default;
};

}  // namespace fpref
