#include <benchmark/benchmark.h>

#include "fpref/losses/losses.hpp"

using namespace fpref;
using namespace fpref::losses;

namespace {

model::BaseModel make_model() {
  std::vector<std::string> tokens{"<bos>", "<eos>", "<unk>"};
  for (int i = 0; i < 60; ++i) tokens.push_back("w" + std::to_string(i));
  RngStream rng(1);
  return model::BaseModel::random(model::Vocab(tokens), {0, 64, 32, 64, 1}, {4, 8.0}, rng);
}

std::vector<TokenId> tokens(std::size_t n, TokenId start) {
  std::vector<TokenId> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<TokenId>(3 + (start + i * 7) % 60);
  return out;
}

void BM_DpoLossAndGrad(benchmark::State& state) {
  const auto m = make_model();
  RngStream rng(2);
  const auto ref = m.init_adapters(rng);
  DpoBatch batch;
  for (int i = 0; i < state.range(0); ++i) {
    batch.items.push_back({tokens(10, i), tokens(16, i + 1), tokens(16, i + 2)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(dpo_loss_and_grad(m, ref, ref, batch));
}
BENCHMARK(BM_DpoLossAndGrad)->Arg(1)->Arg(4);

void BM_KtoLossAndGrad(benchmark::State& state) {
  const auto m = make_model();
  RngStream rng(2);
  const auto ref = m.init_adapters(rng);
  KtoBatch batch;
  for (int i = 0; i < state.range(0); ++i) {
    batch.items.push_back({tokens(10, i), tokens(16, i + 1),
                           i % 2 ? Label::kUndesirable : Label::kDesirable});
  }
  for (auto _ : state) benchmark::DoNotOptimize(kto_loss_and_grad(m, ref, ref, batch));
}
BENCHMARK(BM_KtoLossAndGrad)->Arg(2)->Arg(8);

}  // namespace
