// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "fdmimo/mlp.hpp"
#include "fdmimo/types.hpp"

namespace fdmimo {

struct VAEConfig {
  std::vector<int> hidden{400, 128};
  int latent_dim = 0;  // 0 selects 10 * rank
  double beta = 0.01;
  int batch_size = 128;
  int epochs = 100;
  double learning_rate = 1e-3;
  double leaky_slope = 0.01;
  double logvar_clamp = 10.0;
  std::uint64_t seed = 1;

  int latent_for_rank(int rank) const { return latent_dim > 0 ? latent_dim : 10 * rank; }
  void validate() const;
};

struct LatentGaussian {
  RVector mu;
  RVector logvar;

  RVector variance() const { return logvar.array().exp().matrix(); }
};

/// Encoder in -> hidden... -> 2 * latent (means then log-variances, linear
/// output) and mirrored decoder latent -> ...hidden -> in with tanh output.
/// Samples are divided by `input_scale` before encoding and decoder output
/// is multiplied by it.
struct VAEModel {
  int rank = 1;
  int input_dim = 0;
  int latent_dim = 0;
  double input_scale = 1.0;
  double logvar_clamp = 10.0;
  MLPParams encoder;
  MLPParams decoder;
};

VAEModel make_vae(int rank, int input_dim, const VAEConfig& cfg, std::mt19937_64& rng);

/// Flattening of a complex N_tx x L precoder: real parts of the column-major
/// entries followed by the imaginary parts (length 2 * N_tx * L).
RVector flatten_precoder(const CMatrix& V);
CMatrix unflatten_precoder(const RVector& d, int n_tx, int rank);

LatentGaussian encode(const VAEModel& model, const RVector& sample);
RVector decode(const VAEModel& model, const RVector& z);

/// z = mu + sigma * eps with eps ~ N(0, I) from the given stream.
RVector reparameterize(const LatentGaussian& g, std::mt19937_64& rng);
RVector reparameterize(const LatentGaussian& g, std::uint64_t seed);

/// ||d - d_hat||^2 + beta/2 * sum(mu^2 + sigma^2 - log sigma^2 - 1).
double elbo_loss(const RVector& d, const RVector& d_hat, const LatentGaussian& g, double beta);

struct VAEGradients {
  MLPParams encoder;
  MLPParams decoder;
};

/// Mean loss over the columns of the scaled batch X with fixed noise eps
/// (latent x batch). If `grads` is set, gradients of that mean are added.
double vae_batch_loss(const VAEModel& model, const RMatrix& X_scaled, const RMatrix& eps, double beta,
                      VAEGradients* grads);

struct TrainResult {
  VAEModel model;
  std::vector<double> epoch_loss;
};

/// Minibatch Adam on raw (unscaled) samples, one per column. Deterministic for
/// a fixed cfg.seed. Throws NumericalError on a non-finite loss.
TrainResult train_vae(const RMatrix& samples, int rank, const VAEConfig& cfg);

/// Q / ||Q||_F from the thin QR of V. Throws NumericalError when
/// min |R_ii| <= 1e-9.
CMatrix orthogonalize(const CMatrix& V);

struct RankHistory {
  std::uint32_t q = 0;
  std::vector<int> ranks;
};

/// r = mode of the history; r if at least c_thold percent of the history
/// lies in {r..max}, else max(r - 1, 1).
int fix_rank(std::span<const int> ranks, double c_thold_percent);
std::map<std::uint32_t, int> fix_ranks(std::span<const RankHistory> histories, double c_thold_percent);

/// argmin_t ||mu_t - mean mu||^2 + ||sigma2_t - mean sigma2||^2, ties to the first.
std::size_t representative_mean(std::span<const LatentGaussian> latents);
/// KL(g1 || g2) of diagonal Gaussians.
double kl_gaussian(const LatentGaussian& g1, const LatentGaussian& g2);
/// argmin_t sum_{t' != t} KL(g_min(t,t') || g_max(t,t')), ties to the first.
std::size_t representative_kl(std::span<const LatentGaussian> latents);

/// floor(mean(history)) clamped to 1..15.
int fix_cqi_vae(std::span<const int> cqi_history);

/// Rank-r training set: locations whose mode rank is in {r..max_rank} and, at
/// each, the samples whose rank is in {r..max_rank}.
struct PrecoderDatasetIndex {
  int rank = 1;
  int max_rank = 1;
  std::vector<std::uint32_t> locations;
  std::vector<std::vector<std::uint32_t>> times;  // aligned with locations
  RMatrix samples;                                // one flattened V per column, location-major
  std::vector<std::pair<std::uint32_t, std::uint32_t>> keys;  // (q, t) per column

  std::size_t sample_count() const { return keys.size(); }
};

/// Throws Error when no location qualifies for `rank`.
PrecoderDatasetIndex build_precoder_index(std::span<const RankHistory> histories, int rank, int max_rank);

/// Fills samples from the rank-constrained un-normalized precoder at each
/// included (t, q).
void fill_precoder_samples(PrecoderDatasetIndex& index,
                           const std::function<CMatrix(std::uint32_t t, std::uint32_t q)>& precoder);

/// Binary model file: magic "FDVAE001", u32 rank, input_dim, latent_dim,
/// hidden count, hidden sizes, f64 input_scale, leaky_slope, logvar_clamp,
/// then every weight (column-major) and bias as f64, encoder then decoder.
void save_vae(const VAEModel& model, const std::filesystem::path& path);
VAEModel load_vae(const std::filesystem::path& path);

struct LatentRecord {
  std::uint32_t q = 0;
  std::uint32_t t = 0;
  LatentGaussian latent;
};

/// CSV q, t, mu_0.., logvar_0.. sized for the widest latent; narrower rows
/// leave the trailing cells empty.
void write_latent_csv(std::span<const LatentRecord> records, const std::filesystem::path& path);

}  // namespace fdmimo
