#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpref/data/dataset.hpp"
#include "fpref/model/transformer.hpp"

namespace fpref::model {

struct PretrainConfig {
  int steps = 300;
  int batch_size = 8;
  double lr = 1e-2;
  double init_std = 0.1;
};

// Short seeded next-token pass (Adam, per-token mean loss) over the given
// sequences. Each sequence should already start with <bos>.
BaseModel pretrain(BaseModel init, std::span<const std::vector<TokenId>> sequences,
                   const PretrainConfig& cfg, RngStream rng);

// Vocab from every prompt/response in the corpus, random init, then pretrain
// on [<bos>] prompt response [<eos>] for both responses of every pair.
// dims.vocab_size is filled in from the corpus.
BaseModel build_base_model(const data::FederatedPairDataset& corpus,
                           ModelDims dims, LoraConfig lora,
                           const PretrainConfig& cfg, std::uint64_t seed);

// Mean next-token negative log-likelihood per predicted token.
double mean_token_nll(const BaseModel& model,
                      std::span<const std::vector<TokenId>> sequences);

}  // namespace fpref::model
