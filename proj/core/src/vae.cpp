// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/vae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include <Eigen/QR>

#include "fdmimo/binary_io.hpp"
#include "fdmimo/statfix.hpp"

namespace fdmimo {

void VAEConfig::validate() const {
  if (hidden.empty()) throw std::invalid_argument("VAE needs at least one hidden layer");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden sizes must be positive");
  }
  if (latent_dim < 0) throw std::invalid_argument("latent dimension must be non-negative");
  if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(logvar_clamp > 0.0)) throw std::invalid_argument("log-variance clamp must be positive");
}

VAEModel make_vae(int rank, int input_dim, const VAEConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (rank < 1 || input_dim < 1) throw std::invalid_argument("rank and input dimension must be positive");
  VAEModel m;
  m.rank = rank;
  m.input_dim = input_dim;
  m.latent_dim = cfg.latent_for_rank(rank);
  m.logvar_clamp = cfg.logvar_clamp;

  std::vector<int> enc{input_dim};
  enc.insert(enc.end(), cfg.hidden.begin(), cfg.hidden.end());
  enc.push_back(2 * m.latent_dim);
  std::vector<Activation> enc_act(enc.size() - 1, Activation::LeakyRelu);
  enc_act.back() = Activation::Linear;
  m.encoder = make_mlp(enc, enc_act, cfg.leaky_slope, rng);

  std::vector<int> dec{m.latent_dim};
  dec.insert(dec.end(), cfg.hidden.rbegin(), cfg.hidden.rend());
  dec.push_back(input_dim);
  std::vector<Activation> dec_act(dec.size() - 1, Activation::LeakyRelu);
  dec_act.back() = Activation::Tanh;
  m.decoder = make_mlp(dec, dec_act, cfg.leaky_slope, rng);
  return m;
}

RVector flatten_precoder(const CMatrix& V) {
  const auto n = V.size();
  RVector d(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i) = V.data()[i].real();
    d(n + i) = V.data()[i].imag();
  }
  return d;
}

CMatrix unflatten_precoder(const RVector& d, int n_tx, int rank) {
  const Eigen::Index n = static_cast<Eigen::Index>(n_tx) * rank;
  if (d.size() != 2 * n) throw std::invalid_argument("flattened precoder has the wrong length");
  CMatrix V(n_tx, rank);
  for (Eigen::Index i = 0; i < n; ++i) V.data()[i] = cdouble(d(i), d(n + i));
  return V;
}

namespace {

void check_model(const VAEModel& m) {
  m.encoder.validate();
  m.decoder.validate();
  if (m.encoder.input_dim() != m.input_dim || m.encoder.output_dim() != 2 * m.latent_dim ||
      m.decoder.input_dim() != m.latent_dim || m.decoder.output_dim() != m.input_dim) {
    throw std::invalid_argument("VAE network shapes are inconsistent");
  }
}

}  // namespace

LatentGaussian encode(const VAEModel& model, const RVector& sample) {
  if (sample.size() != model.input_dim) throw std::invalid_argument("sample dimension mismatch");
  const RMatrix out = mlp_forward(model.encoder, RMatrix(sample / model.input_scale));
  LatentGaussian g;
  g.mu = out.col(0).head(model.latent_dim);
  g.logvar = out.col(0).tail(model.latent_dim).cwiseMax(-model.logvar_clamp).cwiseMin(model.logvar_clamp);
  return g;
}

RVector decode(const VAEModel& model, const RVector& z) {
  if (z.size() != model.latent_dim) throw std::invalid_argument("latent dimension mismatch");
  const RMatrix out = mlp_forward(model.decoder, RMatrix(z));
  return out.col(0) * model.input_scale;
}

RVector reparameterize(const LatentGaussian& g, std::mt19937_64& rng) {
  if (g.mu.size() != g.logvar.size()) throw std::invalid_argument("latent mean and log-variance differ in size");
  std::normal_distribution<double> n01;
  RVector z(g.mu.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = g.mu(i) + std::exp(0.5 * g.logvar(i)) * n01(rng);
  return z;
}

RVector reparameterize(const LatentGaussian& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return reparameterize(g, rng);
}

double elbo_loss(const RVector& d, const RVector& d_hat, const LatentGaussian& g, double beta) {
  if (d.size() != d_hat.size()) throw std::invalid_argument("reconstruction size mismatch");
  const double rec = (d - d_hat).squaredNorm();
  const double kl = (g.mu.array().square() + g.logvar.array().exp() - g.logvar.array() - 1.0).sum();
  return rec + 0.5 * beta * kl;
}

double vae_batch_loss(const VAEModel& model, const RMatrix& X, const RMatrix& eps, double beta,
                      VAEGradients* grads) {
  const int n = model.latent_dim;
  const auto B = X.cols();
  if (B == 0) throw std::invalid_argument("empty batch");
  if (eps.rows() != n || eps.cols() != B) throw std::invalid_argument("noise shape mismatch");

  MLPCache enc_cache, dec_cache;
  const RMatrix out = mlp_forward(model.encoder, X, grads ? &enc_cache : nullptr);
  const RMatrix mu = out.topRows(n);
  const RMatrix lv_raw = out.bottomRows(n);
  const RMatrix lv = lv_raw.cwiseMax(-model.logvar_clamp).cwiseMin(model.logvar_clamp);
  const RMatrix sigma = (0.5 * lv.array()).exp().matrix();
  const RMatrix z = mu + sigma.cwiseProduct(eps);
  const RMatrix xhat = mlp_forward(model.decoder, z, grads ? &dec_cache : nullptr);

  const RMatrix diff = xhat - X;
  const double rec = diff.squaredNorm();
  const double kl = (mu.array().square() + lv.array().exp() - lv.array() - 1.0).sum();
  const double inv_b = 1.0 / static_cast<double>(B);
  const double loss = (rec + 0.5 * beta * kl) * inv_b;
  if (!std::isfinite(loss)) throw NumericalError("non-finite VAE loss");
  if (!grads) return loss;

  const RMatrix dz = mlp_backward(model.decoder, dec_cache, (2.0 * inv_b) * diff, grads->decoder);
  RMatrix d_out(2 * n, B);
  d_out.topRows(n) = dz + (beta * inv_b) * mu;
  RMatrix dlv = (dz.array() * eps.array() * 0.5 * sigma.array() +
                 0.5 * beta * inv_b * (lv.array().exp() - 1.0))
                    .matrix();
  dlv = (lv_raw.array().abs() <= model.logvar_clamp).select(dlv, 0.0);
  d_out.bottomRows(n) = dlv;
  mlp_backward(model.encoder, enc_cache, d_out, grads->encoder);
  return loss;
}

TrainResult train_vae(const RMatrix& samples, int rank, const VAEConfig& cfg) {
  cfg.validate();
  if (samples.cols() == 0 || samples.rows() == 0) throw std::invalid_argument("empty VAE training set");
  if (!samples.allFinite()) throw std::invalid_argument("non-finite VAE training sample");
  std::mt19937_64 rng(cfg.seed);
  TrainResult res;
  res.model = make_vae(rank, static_cast<int>(samples.rows()), cfg, rng);
  const double maxabs = samples.cwiseAbs().maxCoeff();
  res.model.input_scale = maxabs > 0.0 ? maxabs : 1.0;
  const RMatrix X = samples / res.model.input_scale;

  AdamState enc_state(res.model.encoder), dec_state(res.model.decoder);
  VAEGradients grads{res.model.encoder.zeros_like(), res.model.decoder.zeros_like()};
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::normal_distribution<double> n01;
  const int n = res.model.latent_dim;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto b = static_cast<Eigen::Index>(end - start);
      RMatrix xb(X.rows(), b);
      for (Eigen::Index j = 0; j < b; ++j) xb.col(j) = X.col(order[start + static_cast<std::size_t>(j)]);
      RMatrix eps(n, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        for (int i = 0; i < n; ++i) eps(i, j) = n01(rng);
      }
      grads.encoder = res.model.encoder.zeros_like();
      grads.decoder = res.model.decoder.zeros_like();
      const double loss = vae_batch_loss(res.model, xb, eps, cfg.beta, &grads);
      total += loss * static_cast<double>(b);
      adam_update(res.model.encoder, grads.encoder, enc_state, cfg.learning_rate);
      adam_update(res.model.decoder, grads.decoder, dec_state, cfg.learning_rate);
    }
    const double mean = total / static_cast<double>(order.size());
    res.epoch_loss.push_back(mean);
    if (!std::isfinite(mean) || !res.model.encoder.all_finite() || !res.model.decoder.all_finite()) {
      throw NumericalError("VAE training diverged at epoch " + std::to_string(epoch));
    }
  }
  return res;
}

CMatrix orthogonalize(const CMatrix& V) {
  if (V.cols() < 1 || V.rows() < V.cols()) throw std::invalid_argument("orthogonalize needs a tall matrix");
  if (!V.allFinite()) throw NumericalError("non-finite matrix to orthogonalize");
  Eigen::HouseholderQR<CMatrix> qr(V);
  const auto L = V.cols();
  const CMatrix R = qr.matrixQR().topRows(L).triangularView<Eigen::Upper>();
  double min_diag = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < L; ++i) min_diag = std::min(min_diag, std::abs(R(i, i)));
  if (min_diag <= 1e-9) throw NumericalError("rank-deficient precoder estimate");
  CMatrix Q = qr.householderQ() * CMatrix::Identity(V.rows(), L);
  return Q / Q.norm();
}

int fix_rank(std::span<const int> ranks, double c_thold_percent) {
  if (ranks.empty()) throw std::invalid_argument("empty rank history");
  if (!(c_thold_percent > 0.0 && c_thold_percent <= 100.0)) {
    throw std::invalid_argument("rank threshold must lie in (0, 100]");
  }
  const int r = mode_of(ranks);
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [r](int v) { return v >= r; });
  // Compare counts rather than fractions so 100% is exact.
  const double needed = c_thold_percent / 100.0 * static_cast<double>(ranks.size());
  if (static_cast<double>(hits) >= needed - 1e-9) return r;
  return std::max(r - 1, 1);
}

std::map<std::uint32_t, int> fix_ranks(std::span<const RankHistory> histories, double c_thold_percent) {
  std::map<std::uint32_t, int> out;
  for (const auto& h : histories) {
    if (!out.emplace(h.q, fix_rank(h.ranks, c_thold_percent)).second) {
      throw std::invalid_argument("duplicate location in rank histories");
    }
  }
  return out;
}

std::size_t representative_mean(std::span<const LatentGaussian> latents) {
  if (latents.empty()) throw std::invalid_argument("empty latent set");
  const auto n = latents.front().mu.size();
  RVector mu_bar = RVector::Zero(n), var_bar = RVector::Zero(n);
  for (const auto& g : latents) {
    mu_bar += g.mu;
    var_bar += g.variance();
  }
  mu_bar /= static_cast<double>(latents.size());
  var_bar /= static_cast<double>(latents.size());
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < latents.size(); ++t) {
    const double d = (latents[t].mu - mu_bar).squaredNorm() + (latents[t].variance() - var_bar).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = t;
    }
  }
  return best;
}

double kl_gaussian(const LatentGaussian& g1, const LatentGaussian& g2) {
  const auto n = g1.mu.size();
  if (g1.logvar.size() != n || g2.mu.size() != n || g2.logvar.size() != n) {
    throw std::invalid_argument("latent dimension mismatch");
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double dlv = g1.logvar(j) - g2.logvar(j);
    const double dm = g1.mu(j) - g2.mu(j);
    acc += dm * dm * std::exp(-g2.logvar(j)) + (std::expm1(dlv) - dlv);
  }
  return 0.5 * acc;
}

std::size_t representative_kl(std::span<const LatentGaussian> latents) {
  if (latents.empty()) throw std::invalid_argument("empty latent set");
  const std::size_t n = latents.size();
  std::vector<double> sums(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double kl = kl_gaussian(latents[a], latents[b]);
      sums[a] += kl;
      sums[b] += kl;
    }
  }
  return static_cast<std::size_t>(std::min_element(sums.begin(), sums.end()) - sums.begin());
}

int fix_cqi_vae(std::span<const int> cqi_history) {
  if (cqi_history.empty()) throw std::invalid_argument("empty CQI history");
  const double mean =
      std::accumulate(cqi_history.begin(), cqi_history.end(), 0.0) / static_cast<double>(cqi_history.size());
  return std::clamp(static_cast<int>(std::floor(mean + 1e-12)), kMinCqi, kMaxCqi);
}

PrecoderDatasetIndex build_precoder_index(std::span<const RankHistory> histories, int rank, int max_rank) {
  if (rank < 1 || rank > max_rank) throw std::invalid_argument("rank out of range");
  PrecoderDatasetIndex idx;
  idx.rank = rank;
  idx.max_rank = max_rank;
  for (const auto& h : histories) {
    if (h.ranks.empty()) throw std::invalid_argument("empty rank history");
    if (mode_of(h.ranks) < rank) continue;
    std::vector<std::uint32_t> ts;
    for (std::size_t t = 0; t < h.ranks.size(); ++t) {
      if (h.ranks[t] >= rank && h.ranks[t] <= max_rank) ts.push_back(static_cast<std::uint32_t>(t));
    }
    idx.locations.push_back(h.q);
    for (auto t : ts) idx.keys.emplace_back(h.q, t);
    idx.times.push_back(std::move(ts));
  }
  if (idx.locations.empty()) throw Error("no location supports rank " + std::to_string(rank));
  return idx;
}

void fill_precoder_samples(PrecoderDatasetIndex& index,
                           const std::function<CMatrix(std::uint32_t t, std::uint32_t q)>& precoder) {
  if (index.keys.empty()) throw std::invalid_argument("empty precoder index");
  for (std::size_t i = 0; i < index.keys.size(); ++i) {
    const auto [q, t] = index.keys[i];
    const CMatrix V = precoder(t, q);
    if (V.cols() != index.rank) throw std::invalid_argument("precoder rank does not match the index");
    const RVector d = flatten_precoder(V);
    if (i == 0) index.samples.resize(d.size(), static_cast<Eigen::Index>(index.keys.size()));
    if (d.size() != index.samples.rows()) throw std::invalid_argument("inconsistent precoder shapes");
    index.samples.col(static_cast<Eigen::Index>(i)) = d;
  }
}

namespace {

constexpr std::string_view kVaeMagic = "FDVAE001";

void write_mlp(std::ostream& os, const MLPParams& net) {
  for (const auto& l : net.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) io::write_f64(os, l.weight.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) io::write_f64(os, l.bias(i));
  }
}

void read_mlp(std::istream& is, MLPParams& net) {
  for (auto& l : net.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = io::read_f64(is, "weight");
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = io::read_f64(is, "bias");
  }
}

}  // namespace

void save_vae(const VAEModel& model, const std::filesystem::path& path) {
  check_model(model);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open model file for writing: " + path.string());
  io::write_magic(os, kVaeMagic);
  io::write_u32(os, static_cast<std::uint32_t>(model.rank));
  io::write_u32(os, static_cast<std::uint32_t>(model.input_dim));
  io::write_u32(os, static_cast<std::uint32_t>(model.latent_dim));
  const auto nh = model.encoder.layers.size() - 1;
  io::write_u32(os, static_cast<std::uint32_t>(nh));
  for (std::size_t i = 0; i < nh; ++i) io::write_u32(os, static_cast<std::uint32_t>(model.encoder.layers[i].weight.rows()));
  io::write_f64(os, model.input_scale);
  io::write_f64(os, model.encoder.leaky_slope);
  io::write_f64(os, model.logvar_clamp);
  write_mlp(os, model.encoder);
  write_mlp(os, model.decoder);
  if (!os) throw Error("failed writing model file: " + path.string());
}

VAEModel load_vae(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open model file: " + path.string());
  io::expect_magic(is, kVaeMagic);
  const int rank = static_cast<int>(io::read_u32(is, "rank"));
  const int input_dim = static_cast<int>(io::read_u32(is, "input_dim"));
  const int latent = static_cast<int>(io::read_u32(is, "latent_dim"));
  const auto nh = io::read_u32(is, "hidden count");
  if (nh == 0 || nh > 64) throw FormatError("bad hidden layer count");
  VAEConfig cfg;
  cfg.hidden.clear();
  for (std::uint32_t i = 0; i < nh; ++i) cfg.hidden.push_back(static_cast<int>(io::read_u32(is, "hidden size")));
  const double scale = io::read_f64(is, "input_scale");
  cfg.leaky_slope = io::read_f64(is, "leaky_slope");
  cfg.logvar_clamp = io::read_f64(is, "logvar_clamp");
  cfg.latent_dim = latent;
  if (rank < 1 || input_dim < 1 || latent < 1) throw FormatError("bad model dimensions");
  std::mt19937_64 rng(0);
  VAEModel m = make_vae(rank, input_dim, cfg, rng);
  m.input_scale = scale;
  read_mlp(is, m.encoder);
  read_mlp(is, m.decoder);
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in model file");
  return m;
}

void write_latent_csv(std::span<const LatentRecord> records, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open latent CSV for writing: " + path.string());
  Eigen::Index n = 0;
  for (const auto& r : records) n = std::max(n, r.latent.mu.size());
  os << "q,t";
  for (Eigen::Index j = 0; j < n; ++j) os << ",mu_" << j;
  for (Eigen::Index j = 0; j < n; ++j) os << ",logvar_" << j;
  os << '\n' << std::fixed << std::setprecision(8);
  for (const auto& r : records) {
    const auto m = r.latent.mu.size();
    os << r.q << ',' << r.t;
    for (Eigen::Index j = 0; j < n; ++j) {
      os << ',';
      if (j < m) os << r.latent.mu(j);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      os << ',';
      if (j < m) os << r.latent.logvar(j);
    }
    os << '\n';
  }
}

}  // namespace fdmimo
