#include <benchmark/benchmark.h>

#include "fpref/federation/aggregator.hpp"

using namespace fpref;
using namespace fpref::fed;

namespace {

std::vector<ClientUpdate> make_updates(std::size_t clients, std::size_t dim) {
  RngStream rng(4);
  std::vector<ClientUpdate> out;
  for (std::size_t k = 0; k < clients; ++k) {
    std::vector<double> d(dim), c(dim);
    for (auto& x : d) x = 0.01 * rng.next_normal();
    for (auto& x : c) x = 0.01 * rng.next_normal();
    out.push_back({ParamVector("bench", d), 1 + k, ParamVector("bench", c), 0.0});
  }
  return out;
}

void BM_Aggregate(benchmark::State& state) {
  const auto algo = static_cast<AggregatorKind>(state.range(0));
  const std::size_t dim = 20000;
  const auto updates = make_updates(8, dim);
  auto server = init_server(ParamVector::zeros("bench", dim), algo);
  for (auto _ : state) server = aggregate(server, updates, algo, {}, 8);
  state.SetLabel(std::string(to_string(algo)));
}
BENCHMARK(BM_Aggregate)->DenseRange(0, 6);

}  // namespace
