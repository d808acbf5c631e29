#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "aspectkit/hallucination.hpp"
#include "aspectkit/text.hpp"

namespace {

using namespace aspectkit;

std::string words(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> pool{"sound", "crisp", "price", "steep", "solid",
                                             "build", "very",  "quite", "light", "the"};
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng() % pool.size()]);
  return join(out, " ");
}

void BM_SemSim(benchmark::State& state) {
  HashedNgramProvider provider;
  const auto review = words(static_cast<std::size_t>(state.range(0)), 1);
  const auto opinion = words(4, 2) + " zzz";  // never verbatim
  for (auto _ : state) benchmark::DoNotOptimize(sem_sim(opinion, review, 2, provider));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SemSim)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_SpanCandidates(benchmark::State& state) {
  const std::vector<std::string> review(static_cast<std::size_t>(state.range(0)), "w");
  for (auto _ : state) benchmark::DoNotOptimize(span_candidates(review, 5, 2));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SpanCandidates)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

}  // namespace
