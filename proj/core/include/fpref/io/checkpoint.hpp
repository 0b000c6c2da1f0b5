#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "fpref/core/param_vector.hpp"
#include "fpref/model/transformer.hpp"

namespace fpref::io {

// Container layout:
//   8 bytes   magic "FPREF001"
//   u64 LE    header length in bytes
//   header    compact JSON, keys sorted
//   u64 LE    value count
//   f64 LE    values
//
// The header records kind ("base" or "adapters"), layout_id, dims, lora and
// vocab_hash (hex). Base checkpoints also carry the vocabulary token list.
inline constexpr char kMagic[9] = "FPREF001";

enum class CheckpointKind { kBase, kAdapters };

struct CheckpointInfo {
  CheckpointKind kind = CheckpointKind::kBase;
  std::string layout_id;
  model::ModelDims dims;
  model::LoraConfig lora;
  std::uint64_t vocab_hash = 0;
  std::size_t value_count = 0;
  nlohmann::json header;  // as stored
};

void save_base(std::ostream& out, const model::BaseModel& model);
void save_base(const std::string& path, const model::BaseModel& model);
model::BaseModel load_base(std::istream& in);
model::BaseModel load_base(const std::string& path);

void save_adapters(std::ostream& out, const model::BaseModel& model,
                   const ParamVector& adapters);
void save_adapters(const std::string& path, const model::BaseModel& model,
                   const ParamVector& adapters);
// Throws LayoutMismatch when the adapters were trained for a different model
// (layout or vocabulary).
ParamVector load_adapters(std::istream& in, const model::BaseModel& model);
ParamVector load_adapters(const std::string& path, const model::BaseModel& model);

// Reads the header and value count, validating the payload length.
CheckpointInfo inspect(std::istream& in);
CheckpointInfo inspect(const std::string& path);
nlohmann::ordered_json to_json(const CheckpointInfo& info);

std::string vocab_hash_hex(std::uint64_t h);

}  // namespace fpref::io
