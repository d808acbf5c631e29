#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "aspectkit/vocab.hpp"

namespace {

using namespace aspectkit;

void BM_AverageLinkage(benchmark::State& state) {
  HashedNgramProvider provider;
  std::vector<std::string> labels;
  std::vector<Vector> points;
  for (int i = 0; i < state.range(0); ++i) {
    labels.push_back("aspect term " + std::to_string(i));
    points.push_back(provider.embed(labels.back()));
  }
  for (auto _ : state) benchmark::DoNotOptimize(average_linkage(points, labels, 15));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AverageLinkage)->RangeMultiplier(2)->Range(32, 512)->Complexity();

}  // namespace
