#include "fpref/model/pretrain.hpp"

#include <cmath>

#include "fpref/core/error.hpp"

namespace fpref::model {

BaseModel pretrain(BaseModel init, std::span<const std::vector<TokenId>> sequences,
                   const PretrainConfig& cfg, RngStream rng) {
  if (sequences.empty() || cfg.steps <= 0) return init;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<double> w(init.weights().values().begin(), init.weights().values().end());
  std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0);
  BaseModel model = init;
  const auto batch = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<double> g(w.size(), 0.0);
    std::size_t predicted = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& seq = sequences[rng.next_below(sequences.size())];
      auto sg = sequence_logprob_base_grad(model, seq);
      auto sv = sg.grad.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= sv[i];
      predicted += sg.predicted;
    }
    const double inv = 1.0 / static_cast<double>(predicted);
    const double c1 = 1.0 - std::pow(kBeta1, step);
    const double c2 = 1.0 - std::pow(kBeta2, step);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * inv;
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
      w[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
    model = model.with_weights(ParamVector(init.weights().layout_id(), w));
  }
  return model;
}

BaseModel build_base_model(const data::FederatedPairDataset& corpus,
                           ModelDims dims, LoraConfig lora,
                           const PretrainConfig& cfg, std::uint64_t seed) {
  std::vector<std::string> texts;
  for (const auto& [id, pairs] : corpus.clients) {
    for (const auto& p : pairs) {
      texts.push_back(p.prompt);
      texts.push_back(p.chosen);
      texts.push_back(p.rejected);
    }
  }
  Vocab vocab = Vocab::build(texts);
  dims.vocab_size = static_cast<int>(vocab.size());

  RngStream root(seed);
  auto init_rng = root.derive("base-init", 0);
  BaseModel model = BaseModel::random(vocab, dims, lora, init_rng, cfg.init_std);

  const auto limit = static_cast<std::size_t>(dims.context_len) + 1;
  std::vector<std::vector<TokenId>> sequences;
  for (const auto& [id, pairs] : corpus.clients) {
    for (const auto& p : pairs) {
      for (const auto* response : {&p.chosen, &p.rejected}) {
        std::vector<TokenId> seq{Vocab::kBos};
        for (TokenId t : vocab.encode(p.prompt)) seq.push_back(t);
        for (TokenId t : vocab.encode(*response)) seq.push_back(t);
        seq.push_back(Vocab::kEos);
        if (seq.size() > limit) seq.resize(limit);
        sequences.push_back(std::move(seq));
      }
    }
  }
  return pretrain(std::move(model), sequences, cfg, root.derive("base-pretrain", 0));
}

double mean_token_nll(const BaseModel& model,
                      std::span<const std::vector<TokenId>> sequences) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    std::span<const TokenId> s(seq);
    std::vector<TokenId> prompt;  // empty: score everything after <bos>
    double lp = AdaptedModel(model).response_logprob(prompt, s.subspan(1));
    total -= lp;
    n += seq.size() - 1;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

}  // namespace fpref::model
