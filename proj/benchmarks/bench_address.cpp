#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "sixdiff/address.hpp"
#include "sixdiff/alias_prefix_set.hpp"

namespace {

std::vector<sixdiff::Ipv6Address> random_addresses(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<sixdiff::Ipv6Address> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(rng(), rng() & 0xFFFF);
  return out;
}

void BM_FormatParse(benchmark::State& state) {
  const auto addrs = random_addresses(1024, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto text = sixdiff::format_address(addrs[i++ & 1023]);
    benchmark::DoNotOptimize(sixdiff::parse_address(text));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FormatParse);

void BM_NybbleRoundTrip(benchmark::State& state) {
  const auto addrs = random_addresses(1024, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sixdiff::from_nybbles(sixdiff::to_nybbles(addrs[i++ & 1023])));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NybbleRoundTrip);

void BM_AliasTrieLookup(benchmark::State& state) {
  const auto heads = random_addresses(static_cast<std::size_t>(state.range(0)), 3);
  sixdiff::AliasPrefixSet set;
  for (const auto& h : heads) set.insert(sixdiff::Prefix(h, 96));
  const auto probes = random_addresses(1024, 4);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(set.covers(probes[i++ & 1023]));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AliasTrieLookup)->Arg(100)->Arg(10000);

}  // namespace
