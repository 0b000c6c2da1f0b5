#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpref/core/param_vector.hpp"
#include "fpref/core/rng.hpp"
#include "fpref/model/vocab.hpp"

namespace fpref::model {

struct ModelDims {
  int vocab_size = 0;
  int context_len = 64;
  int embed_dim = 32;
  int hidden_dim = 64;
  int n_layers = 1;

  bool operator==(const ModelDims&) const = default;
};

struct LoraConfig {
  int rank = 4;
  double alpha = 8.0;

  double scale() const noexcept { return alpha / rank; }
  bool operator==(const LoraConfig&) const = default;
};

// One adapted projection. `offset` indexes the base weights (row-major,
// rows x cols); `adapter_offset` indexes the adapter vector, where A (rank x
// cols) is followed by B (rows x rank).
struct MatrixSlot {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t adapter_offset = 0;
};

// A small pre-norm causal transformer: token + position embeddings, then per
// layer single-head causal attention and a SiLU MLP, each with a residual
// connection and parameter-free RMS normalisation, then a linear head.
// Every linear projection (q, k, v, o, mlp_in, mlp_out, head) carries a LoRA
// adapter W' = W + (alpha / rank) * B * A.
//
// Base weights are frozen. Sequences are scored as [<bos>] + prompt +
// response, so a prompt may be empty.
class BaseModel {
 public:
  BaseModel(Vocab vocab, ModelDims dims, LoraConfig lora, ParamVector weights);

  static BaseModel random(Vocab vocab, ModelDims dims, LoraConfig lora,
                          RngStream& rng, double init_std = 0.1);

  static std::string base_layout_id(const ModelDims& dims);
  static std::size_t base_size(const ModelDims& dims);

  const Vocab& vocab() const noexcept { return vocab_; }
  const ModelDims& dims() const noexcept { return dims_; }
  const LoraConfig& lora() const noexcept { return lora_; }
  const ParamVector& weights() const noexcept { return weights_; }

  BaseModel with_lora(LoraConfig lora) const;
  BaseModel with_weights(ParamVector weights) const;

  const std::string& adapter_layout_id() const noexcept { return adapter_layout_; }
  std::size_t adapter_size() const noexcept { return adapter_size_; }
  std::span<const MatrixSlot> adapted_matrices() const noexcept { return slots_; }

  // A = 0 and B = 0.
  ParamVector zero_adapters() const;
  // A ~ N(0, 1/cols), B = 0, so the adapted model equals the base exactly.
  ParamVector init_adapters(RngStream& rng) const;

 private:
  void index_layout();

  Vocab vocab_;
  ModelDims dims_;
  LoraConfig lora_;
  ParamVector weights_;
  std::vector<MatrixSlot> slots_;
  std::string adapter_layout_;
  std::size_t adapter_size_ = 0;
};

struct LogProbGrad {
  double value = 0.0;
  ParamVector grad;  // adapter layout
};

// The base model with one adapter vector folded into its projection weights.
// Construct once and score many sequences.
class AdaptedModel {
 public:
  explicit AdaptedModel(const BaseModel& base);
  AdaptedModel(const BaseModel& base, const ParamVector& adapters);

  const BaseModel& base() const noexcept { return *base_; }

  // Sum over response positions of log p(token | <bos>, prompt, earlier
  // response tokens). Throws ContextOverflow when prompt + response exceeds
  // the context, OutOfVocabToken for ids outside the vocab, InvalidArgument
  // for an empty response.
  double response_logprob(std::span<const TokenId> prompt,
                          std::span<const TokenId> response) const;

  // Gradient with respect to the adapter vector only. Requires adapters.
  LogProbGrad logprob_grad(std::span<const TokenId> prompt,
                           std::span<const TokenId> response) const;

  // Logits for the token following [<bos>] + context.
  std::vector<double> next_token_logits(std::span<const TokenId> context) const;

 private:
  const BaseModel* base_;
  std::optional<ParamVector> adapters_;
  std::vector<double> effective_;
};

double response_logprob(const BaseModel& model, const ParamVector& adapters,
                        std::span<const TokenId> prompt,
                        std::span<const TokenId> response);
LogProbGrad logprob_grad(const BaseModel& model, const ParamVector& adapters,
                         std::span<const TokenId> prompt,
                         std::span<const TokenId> response);
// Base weights only, no adapter arithmetic at all.
double base_response_logprob(const BaseModel& model,
                             std::span<const TokenId> prompt,
                             std::span<const TokenId> response);

struct SamplingConfig {
  std::size_t max_len = 24;
  // <= 0 selects greedy argmax decoding (lowest id wins ties).
  double temperature = 0.7;
};

// Stops at <eos> (not included in the output), at max_len tokens, or when the
// context is full. Throws ContextOverflow if the prompt leaves no room.
std::vector<TokenId> sample_response(const BaseModel& model,
                                     const ParamVector& adapters,
                                     std::span<const TokenId> prompt,
                                     const SamplingConfig& cfg, RngStream& rng);

struct SequenceGrad {
  double logprob = 0.0;     // sum over predicted positions
  std::size_t predicted = 0;
  ParamVector grad;         // base layout
};

// Next-token log-likelihood of tokens[1..] given the prefix, with gradient
// over every base weight. tokens[0] is normally <bos>. Used for pretraining.
SequenceGrad sequence_logprob_base_grad(const BaseModel& model,
                                        std::span<const TokenId> tokens);

}  // namespace fpref::model
