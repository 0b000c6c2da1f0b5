#include "fpref/core/types.hpp"

#include "fpref/core/error.hpp"

namespace fpref {

std::string_view to_string(Label label) noexcept {
  return label == Label::kDesirable ? "desirable" : "undesirable";
}

Label label_from_string(std::string_view text) {
  if (text == "desirable") return Label::kDesirable;
  if (text == "undesirable") return Label::kUndesirable;
  throw InvalidArgument("unknown label '" + std::string(text) + "'");
}

}  // namespace fpref
