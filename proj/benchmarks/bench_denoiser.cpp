#include <benchmark/benchmark.h>

#include <random>

#include "sixdiff/denoiser.hpp"

namespace {

sixdiff::ModelConfig desk_model() {
  sixdiff::ModelConfig cfg;
  cfg.d_embed = 32;
  cfg.d_ff = 128;
  cfg.n_layers = 4;
  cfg.window_schedule = {4, 8, 16, 32};
  cfg.dropout = 0.0;
  return cfg;
}

void BM_PredictNoise(benchmark::State& state) {
  const auto cfg = state.range(0) == 0 ? desk_model() : sixdiff::ModelConfig{};
  const sixdiff::DenoiserModel model(cfg, 1);
  const int batch = 64;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  sixdiff::Matrix x(batch * cfg.seq_len, cfg.d_embed);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(sixdiff::predict_noise(model, x, 100));
  state.SetItemsProcessed(state.iterations() * batch);
  state.SetLabel(state.range(0) == 0 ? "desk" : "full");
}
BENCHMARK(BM_PredictNoise)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
