#include <benchmark/benchmark.h>

#include "fpref/data/dataset.hpp"
#include "fpref/data/synthetic.hpp"

using namespace fpref;

namespace {

void BM_SplitAndRedistribute(benchmark::State& state) {
  data::SyntheticCorpusSpec spec;
  spec.clients = static_cast<std::size_t>(state.range(0));
  spec.min_pairs_per_client = 50;
  spec.max_pairs_per_client = 100;
  const auto corpus = data::make_marker_corpus(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(data::redistribute(data::split_pairs(corpus), 2023));
  }
}
BENCHMARK(BM_SplitAndRedistribute)->Arg(4)->Arg(32);

}  // namespace
