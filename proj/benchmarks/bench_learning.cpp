// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "fdmimo/spatial.hpp"
#include "fdmimo/vae.hpp"

using namespace fdmimo;

static void BM_VaeBatchStep(benchmark::State& state) {
  const int rank = static_cast<int>(state.range(0));
  VAEConfig cfg;
  std::mt19937_64 rng(1);
  auto model = make_vae(rank, 32 * rank, cfg, rng);
  const RMatrix X = RMatrix::Random(32 * rank, cfg.batch_size);
  const RMatrix eps = RMatrix::Random(model.latent_dim, cfg.batch_size);
  VAEGradients grads{model.encoder.zeros_like(), model.decoder.zeros_like()};
  for (auto _ : state) benchmark::DoNotOptimize(vae_batch_loss(model, X, eps, cfg.beta, &grads));
  state.SetItemsProcessed(state.iterations() * cfg.batch_size);
}
BENCHMARK(BM_VaeBatchStep)->Arg(1)->Arg(4);

static void BM_GprFit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 60.0);
  RMatrix X(n, 3);
  for (int i = 0; i < n; ++i) X.row(i) << u(rng), u(rng), 2.0;
  const RMatrix Y = RMatrix::Random(n, 64);
  for (auto _ : state) benchmark::DoNotOptimize(gpr_fit(X, Y));
}
BENCHMARK(BM_GprFit)->Arg(60)->Arg(240)->Unit(benchmark::kMillisecond);

static void BM_NniQuery(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> wig(-0.3, 0.3), u(3.0, 30.0);
  std::vector<Point2> pts;
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 12; ++c) pts.push_back({3.0 * c + wig(rng), 3.0 * r + wig(rng)});
  }
  const Delaunay tri(pts);
  for (auto _ : state) benchmark::DoNotOptimize(sibson_weights(tri, {u(rng), u(rng)}));
}
BENCHMARK(BM_NniQuery);

static void BM_DelaunayBuild(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<Point2> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = {u(rng), u(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(Delaunay(pts));
}
BENCHMARK(BM_DelaunayBuild)->Arg(240);

BENCHMARK_MAIN();
