// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "fdmimo/selection.hpp"

using namespace fdmimo;

namespace {

std::vector<CMatrix> make_slice(int K, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  std::vector<CMatrix> out(K, CMatrix(4, 16));
  for (auto& H : out) {
    for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = cdouble(n(rng), n(rng));
  }
  return out;
}

LinkConfig link() {
  LinkConfig cfg;
  cfg.noise_variance = 0.1;
  return cfg;
}

}  // namespace

static void BM_ClsmSelect(benchmark::State& state) {
  const Codebook cb(BeamConfig{}, 4);
  const auto slice = make_slice(static_cast<int>(state.range(0)), 1);
  const auto cfg = link();
  for (auto _ : state) benchmark::DoNotOptimize(clsm_select(slice, cb, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<long>(cb.size()));
}
BENCHMARK(BM_ClsmSelect)->Arg(4)->Arg(24);

static void BM_SvdSelect(benchmark::State& state) {
  const auto slice = make_slice(static_cast<int>(state.range(0)), 2);
  const auto cfg = link();
  for (auto _ : state) benchmark::DoNotOptimize(svd_select(slice, cfg));
}
BENCHMARK(BM_SvdSelect)->Arg(4)->Arg(24);

static void BM_MmseEqualizer(benchmark::State& state) {
  const auto H = make_slice(1, 3)[0];
  const Codebook cb(BeamConfig{}, 4);
  const auto& W = cb.entries().back().W;
  for (auto _ : state) benchmark::DoNotOptimize(mmse_equalizer(H, W, 0.1));
}
BENCHMARK(BM_MmseEqualizer);

static void BM_MmseSinrsFused(benchmark::State& state) {
  const auto H = make_slice(1, 4)[0];
  const Codebook cb(BeamConfig{}, 4);
  const SmallCMatrix A = H * cb.entries().back().W;
  double out[4];
  for (auto _ : state) {
    mmse_layer_sinrs(A, 0.1, SinrForm::Squared, out);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_MmseSinrsFused);

static void BM_BicmCapacity(benchmark::State& state) {
  double s = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bicm_capacity(s, 6));
    s = s > 1e3 ? 0.01 : s * 1.1;
  }
}
BENCHMARK(BM_BicmCapacity);

static void BM_EffectiveSinr(benchmark::State& state) {
  std::vector<double> sinrs(96);
  for (std::size_t i = 0; i < sinrs.size(); ++i) sinrs[i] = 0.5 + 0.3 * static_cast<double>(i);
  for (auto _ : state) benchmark::DoNotOptimize(effective_sinr(sinrs, 1.0, 4));
}
BENCHMARK(BM_EffectiveSinr);
