#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "halfspec/varint.hpp"

using namespace halfspec;

namespace {

std::vector<std::uint64_t> random_keys(std::size_t count, double gap_p) {
  std::mt19937_64 rng(5);
  std::geometric_distribution<std::uint64_t> gap(gap_p);
  std::vector<std::uint64_t> keys(count);
  std::uint64_t key = 0;
  for (auto& k : keys) {
    k = key;
    key += 1 + gap(rng);
  }
  return keys;
}

void BM_EncodeKeys(benchmark::State& state) {
  const auto keys = random_keys(100000, 1.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(encode_keys(keys));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(keys.size()));
}
BENCHMARK(BM_EncodeKeys)->Arg(2)->Arg(200);

void BM_DecodeKeys(benchmark::State& state) {
  const auto keys = random_keys(100000, 1.0 / static_cast<double>(state.range(0)));
  const auto bytes = encode_keys(keys);
  for (auto _ : state) benchmark::DoNotOptimize(decode_keys(bytes, keys.size()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(keys.size()));
}
BENCHMARK(BM_DecodeKeys)->Arg(2)->Arg(200);

void BM_IndexSizeTracker(benchmark::State& state) {
  auto keys = random_keys(20000, 0.01);
  std::shuffle(keys.begin(), keys.end(), std::mt19937_64(6));
  for (auto _ : state) {
    IndexSizeTracker t;
    for (auto k : keys) t.insert(k);
    benchmark::DoNotOptimize(t.bytes());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(keys.size()));
}
BENCHMARK(BM_IndexSizeTracker);

}  // namespace
