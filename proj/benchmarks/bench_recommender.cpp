#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "aspectkit/recommender.hpp"

namespace {

using namespace aspectkit;

// One SGD epoch over n examples with 15 aspect features.
void BM_TrainEpoch(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> rating(1.0, 5.0);
  std::vector<RatingExample> data;
  for (int k = 0; k < state.range(0); ++k) {
    AspectFeature f(15, 0.0);
    f[rng() % 15] = 1.0;
    data.push_back({"u" + std::to_string(rng() % 500), "i" + std::to_string(rng() % 200),
                    rating(rng), f, 20});
  }
  Hyperparams hp;
  hp.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, hp));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainEpoch)->Arg(1000)->Arg(10000);

}  // namespace
