#include <benchmark/benchmark.h>

#include "fpref/model/transformer.hpp"

using namespace fpref;
using namespace fpref::model;

namespace {

BaseModel make_model(int embed, int layers) {
  std::vector<std::string> tokens{"<bos>", "<eos>", "<unk>"};
  for (int i = 0; i < 60; ++i) tokens.push_back("w" + std::to_string(i));
  RngStream rng(1);
  return BaseModel::random(Vocab(tokens), {0, 64, embed, 2 * embed, layers}, {4, 8.0}, rng);
}

std::vector<TokenId> tokens(std::size_t n, TokenId start) {
  std::vector<TokenId> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<TokenId>(3 + (start + i * 7) % 60);
  return out;
}

void BM_ResponseLogprob(benchmark::State& state) {
  const auto m = make_model(static_cast<int>(state.range(0)), 1);
  RngStream rng(2);
  const auto a = m.init_adapters(rng);
  const auto prompt = tokens(12, 1), response = tokens(20, 5);
  for (auto _ : state) benchmark::DoNotOptimize(response_logprob(m, a, prompt, response));
}
BENCHMARK(BM_ResponseLogprob)->Arg(16)->Arg(32)->Arg(64);

void BM_LogprobGrad(benchmark::State& state) {
  const auto m = make_model(static_cast<int>(state.range(0)), 1);
  RngStream rng(2);
  const auto a = m.init_adapters(rng);
  const auto prompt = tokens(12, 1), response = tokens(20, 5);
  for (auto _ : state) benchmark::DoNotOptimize(logprob_grad(m, a, prompt, response));
}
BENCHMARK(BM_LogprobGrad)->Arg(16)->Arg(32)->Arg(64);

void BM_SampleResponse(benchmark::State& state) {
  const auto m = make_model(32, 1);
  const auto a = m.zero_adapters();
  const auto prompt = tokens(8, 1);
  RngStream rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(sample_response(m, a, prompt, {24, 0.7}, rng));
}
BENCHMARK(BM_SampleResponse);

}  // namespace
