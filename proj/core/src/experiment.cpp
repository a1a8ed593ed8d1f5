// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

namespace fdmimo {

namespace {

constexpr const char* kFixing = "fixing";
constexpr const char* kEvaluation = "evaluation";

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad " + std::string(what) + ": " + std::string(s));
  }
  return v;
}

}  // namespace

Scheme Scheme::parse(std::string_view text) {
  Scheme s;
  if (text == "clsm") return s;
  if (text.starts_with("clsm-delayed:")) {
    s.kind = Kind::ClsmDelayed;
    s.param = parse_int(text.substr(13), "delay");
    if (s.param < 0) throw std::invalid_argument("delay must be non-negative");
    return s;
  }
  if (text.starts_with("statfix:")) {
    s.kind = Kind::Statfix;
    s.param = parse_int(text.substr(8), "statistic variant");
    if (s.param < 1 || s.param > 3) throw std::invalid_argument("statistic variant must be 1, 2 or 3");
    return s;
  }
  if (text == "vae:mean") {
    s.kind = Kind::VaeMean;
    return s;
  }
  if (text == "vae:kl") {
    s.kind = Kind::VaeKl;
    return s;
  }
  throw std::invalid_argument("unknown scheme: " + std::string(text));
}

std::string Scheme::name() const {
  switch (kind) {
    case Kind::Clsm: return "clsm";
    case Kind::ClsmDelayed: return "clsm-delayed:" + std::to_string(param);
    case Kind::Statfix: return "statfix:" + std::to_string(param);
    case Kind::VaeMean: return "vae:mean";
    case Kind::VaeKl: return "vae:kl";
  }
  return "clsm";
}

void ExperimentConfig::validate() const {
  scene.validate();
  beams.validate();
  link.validate();
  vae.validate();
  gpr.validate();
  if (T == 0 || K == 0) throw std::invalid_argument("T and K must be positive");
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw std::invalid_argument("test ratio must lie in (0, 1)");
  if (beams.n_tx() != scene.n_tx()) throw std::invalid_argument("codebook ports do not match the scene array");
  if (!(c_thold > 0.0 && c_thold <= 100.0)) throw std::invalid_argument("c_thold must lie in (0, 100]");
  if (n_ri < 1) throw std::invalid_argument("N_RI must be positive");
  if (workers < 1) throw std::invalid_argument("workers must be positive");
}

ChannelDataset Experiment::make_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  return generate_dataset(cfg.scene, cfg.seed, cfg.T, cfg.K, cfg.workers);
}

Experiment::Experiment(ExperimentConfig cfg, ChannelDataset ds)
    : cfg_(std::move(cfg)),
      ds_(std::move(ds)),
      reader_(std::make_unique<ChannelReader>(ds_)),
      split_(split_grid(ds_, cfg_.test_ratio)),
      codebook_(cfg_.beams, std::min({kMaxCodebookRank, static_cast<int>(ds_.n_rx()), cfg_.beams.n_tx()})) {
  cfg_.link.noise_variance = cfg_.scene.noise_variance;
  cfg_.validate();
  if (ds_.n_tx() != static_cast<std::uint32_t>(cfg_.beams.n_tx())) {
    throw std::invalid_argument("dataset port count does not match the codebook");
  }
  if (ds_.n_rx() > static_cast<std::uint32_t>(kMaxRx)) throw std::invalid_argument("too many receive antennas");
}

int Experiment::max_rank() const { return static_cast<int>(std::min(ds_.n_rx(), ds_.n_tx())); }

const std::vector<std::uint32_t>& Experiment::locations(std::string_view split) const {
  if (split == "train") return split_.train;
  if (split == "test") return split_.test;
  throw std::invalid_argument("split must be train or test");
}

std::uint64_t Experiment::derived_seed(std::uint64_t salt) const {
  return splitmix64(splitmix64(cfg_.seed) ^ (salt * 0x9e3779b97f4a7c15ULL));
}

// ---------------------------------------------------------------------------
// Fixing stage

std::vector<SelectionRecord> Experiment::clsm_records(std::uint32_t q) {
  std::vector<SelectionRecord> recs(ds_.T());
  for (std::uint32_t t = 0; t < ds_.T(); ++t) {
    const auto slice = reader_->slice(t, q);
    recs[t] = clsm_select(slice, codebook_, cfg_.link);
    recs[t].t = t;
    recs[t].q = q;
  }
  return recs;
}

const std::vector<SelectionRecord>& Experiment::clsm_train() {
  if (!clsm_train_) {
    reader_->set_stage(kFixing);
    const auto& train = split_.train;
    const std::uint32_t T = ds_.T();
    std::vector<SelectionRecord> out(train.size() * T);
    parallel_for(train.size(), cfg_.workers, [&](std::size_t i) {
      auto recs = clsm_records(train[i]);
      std::move(recs.begin(), recs.end(), out.begin() + static_cast<std::ptrdiff_t>(i * T));
    });
    for (std::size_t i = 0; i < train.size(); ++i) {
      clsm_eval_.emplace(train[i], std::vector<SelectionRecord>(out.begin() + static_cast<std::ptrdiff_t>(i * T),
                                                                 out.begin() + static_cast<std::ptrdiff_t>((i + 1) * T)));
    }
    clsm_train_ = std::move(out);
  }
  return *clsm_train_;
}

const std::vector<SelectionRecord>& Experiment::svd_train() {
  if (!svd_train_) {
    reader_->set_stage(kFixing);
    const auto& train = split_.train;
    const std::uint32_t T = ds_.T();
    std::vector<SelectionRecord> out(train.size() * T);
    parallel_for(train.size() * T, cfg_.workers, [&](std::size_t i) {
      const std::uint32_t q = train[i / T];
      const auto t = static_cast<std::uint32_t>(i % T);
      out[i] = svd_select(reader_->slice(t, q), cfg_.link);
      out[i].t = t;
      out[i].q = q;
    });
    svd_train_ = std::move(out);
  }
  return *svd_train_;
}

const std::vector<ParamHistory>& Experiment::statfix_histories() {
  if (!statfix_hist_) {
    const auto& recs = clsm_train();
    reader_->set_stage(kFixing);
    const auto& train = split_.train;
    const std::uint32_t T = ds_.T();
    std::vector<ParamHistory> hist(train.size());
    parallel_for(train.size(), cfg_.workers, [&](std::size_t i) {
      auto& h = hist[i];
      h.q = train[i];
      for (std::uint32_t t = 0; t < T; ++t) {
        const auto& r = recs[i * T + t];
        h.pmi.push_back(*r.params.pmi);
        h.rank.push_back(r.params.rank);
        h.clsm_cqi.push_back(r.params.cqi);
      }
      const CMatrix& W = codebook_.at(mode_of(h.pmi)).W;
      for (std::uint32_t t = 0; t < T; ++t) {
        h.fixed_cqi.push_back(cqi_for_precoder(reader_->slice(t, h.q), W, cfg_.link));
      }
    });
    statfix_hist_ = std::move(hist);
  }
  return *statfix_hist_;
}

const std::vector<LocatedParams>& Experiment::statfix_train(int variant) {
  auto it = statfix_train_.find(variant);
  if (it == statfix_train_.end()) {
    const auto& hist = statfix_histories();
    std::vector<LocatedParams> table;
    for (const auto& h : hist) table.push_back({ds_.location(h.q), fix_codebook_params(h, codebook_, variant)});
    it = statfix_train_.emplace(variant, std::move(table)).first;
  }
  return it->second;
}

std::vector<LocatedParams> Experiment::statfix_test(int variant) {
  const auto& train = statfix_train(variant);
  std::vector<LocatedParams> out;
  for (auto q : split_.test) {
    LocatedParams lp{ds_.location(q), nearest_neighbor_infer(train, ds_.location(q))};
    lp.params.source = ParamSource::Inferred;
    out.push_back(std::move(lp));
  }
  return out;
}

const std::vector<RankHistory>& Experiment::rank_histories() {
  if (!rank_hist_) {
    const auto& recs = svd_train();
    const std::uint32_t T = ds_.T();
    std::vector<RankHistory> hist(split_.train.size());
    for (std::size_t i = 0; i < hist.size(); ++i) {
      hist[i].q = split_.train[i];
      for (std::uint32_t t = 0; t < T; ++t) hist[i].ranks.push_back(recs[i * T + t].params.rank);
    }
    rank_hist_ = std::move(hist);
  }
  return *rank_hist_;
}

const std::map<std::uint32_t, int>& Experiment::fixed_ranks() {
  if (!fixed_ri_) fixed_ri_ = fix_ranks(rank_histories(), cfg_.c_thold);
  return *fixed_ri_;
}

const PrecoderDatasetIndex& Experiment::precoder_index(int rank) {
  auto it = index_.find(rank);
  if (it != index_.end()) return it->second;
  const auto& recs = svd_train();
  auto idx = build_precoder_index(rank_histories(), rank, max_rank());
  reader_->set_stage(kFixing);
  std::map<std::uint32_t, std::size_t> row;
  for (std::size_t i = 0; i < split_.train.size(); ++i) row[split_.train[i]] = i;
  const std::uint32_t T = ds_.T();
  const double scale = std::sqrt(static_cast<double>(rank));
  // Rank-constrained un-normalized precoders; reuse the unconstrained winner
  // when it already has the requested rank.
  std::vector<CMatrix> vs(idx.keys.size());
  parallel_for(idx.keys.size(), cfg_.workers, [&](std::size_t i) {
    const auto [q, t] = idx.keys[i];
    const auto& rec = recs[row.at(q) * T + t];
    if (rec.params.rank == rank) {
      vs[i] = rec.params.W * scale;
    } else {
      vs[i] = svd_select(reader_->slice(t, q), cfg_.link, rank).params.W * scale;
    }
  });
  std::size_t next = 0;
  fill_precoder_samples(idx, [&](std::uint32_t, std::uint32_t) { return vs[next++]; });
  return index_.emplace(rank, std::move(idx)).first->second;
}

const TrainResult& Experiment::vae_model(int rank) {
  auto it = models_.find(rank);
  if (it != models_.end()) return it->second;
  const std::filesystem::path file =
      cfg_.model_dir.empty() ? std::filesystem::path{} : cfg_.model_dir / ("vae_rank" + std::to_string(rank) + ".bin");
  TrainResult res;
  if (!file.empty() && std::filesystem::exists(file)) {
    res.model = load_vae(file);
    if (res.model.rank != rank || res.model.input_dim != 2 * static_cast<int>(ds_.n_tx()) * rank) {
      throw FormatError("model file does not match rank " + std::to_string(rank) + ": " + file.string());
    }
    spdlog::info("loaded rank-{} VAE from {}", rank, file.string());
  } else {
    const auto& idx = precoder_index(rank);
    VAEConfig vc = cfg_.vae;
    vc.seed = derived_seed(0x7ae000ULL + static_cast<std::uint64_t>(rank));
    spdlog::info("training rank-{} VAE on {} samples from {} locations", rank, idx.sample_count(),
                 idx.locations.size());
    res = train_vae(idx.samples, rank, vc);
    if (!res.epoch_loss.empty()) {
      spdlog::info("rank-{} VAE loss {:.4f} -> {:.4f}", rank, res.epoch_loss.front(), res.epoch_loss.back());
    }
    if (!file.empty()) {
      std::filesystem::create_directories(cfg_.model_dir);
      save_vae(res.model, file);
    }
  }
  return models_.emplace(rank, std::move(res)).first->second;
}

namespace {

struct Representative {
  LatentGaussian latent;
  std::uint32_t t = 0;
};

Representative pick_representative(const VAEModel& model, const PrecoderDatasetIndex& idx, std::uint32_t q,
                                   RepresentativeMethod method) {
  std::vector<LatentGaussian> latents;
  std::vector<std::uint32_t> times;
  for (std::size_t i = 0; i < idx.keys.size(); ++i) {
    if (idx.keys[i].first != q) continue;
    latents.push_back(encode(model, idx.samples.col(static_cast<Eigen::Index>(i))));
    times.push_back(idx.keys[i].second);
  }
  if (latents.empty()) throw Error("no rank-compatible samples at location " + std::to_string(q));
  const std::size_t star =
      method == RepresentativeMethod::Mean ? representative_mean(latents) : representative_kl(latents);
  return {latents[star], times[star]};
}

}  // namespace

std::vector<LocatedParams> Experiment::vae_fix_train(RepresentativeMethod method, VaeOutcome& out) {
  out.fixed_ri = fixed_ranks();
  const auto& train = split_.train;
  const std::uint32_t T = ds_.T();
  const int n_tx = static_cast<int>(ds_.n_tx());

  std::set<int> ranks;
  for (const auto& [q, r] : out.fixed_ri) ranks.insert(r);
  for (int r : ranks) {
    precoder_index(r);
    vae_model(r);
  }

  reader_->set_stage(kFixing);
  std::vector<LocatedParams> fixed(train.size());
  std::vector<LatentRecord> reps(train.size());
  std::vector<char> fell_back(train.size(), 0);
  parallel_for(train.size(), cfg_.workers, [&](std::size_t i) {
    const std::uint32_t q = train[i];
    const int r = out.fixed_ri.at(q);
    const auto& model = models_.at(r).model;
    const auto rep = pick_representative(model, index_.at(r), q, method);
    reps[i] = {q, rep.t, rep.latent};
    TransmissionParams p;
    p.source = ParamSource::Fixed;
    try {
      p.W = orthogonalize(unflatten_precoder(decode(model, rep.latent.mu), n_tx, r));
      p.rank = r;
    } catch (const NumericalError&) {
      const auto recs = clsm_records(q);
      std::vector<int> pmis;
      for (const auto& rec : recs) pmis.push_back(*rec.params.pmi);
      const auto& e = codebook_.at(mode_of(pmis));
      p.W = e.W;
      p.rank = e.rank;
      p.pmi = e.pmi;
      fell_back[i] = 1;
    }
    std::vector<int> cqis;
    for (std::uint32_t t = 0; t < T; ++t) cqis.push_back(cqi_for_precoder(reader_->slice(t, q), p.W, cfg_.link));
    p.cqi = fix_cqi_vae(cqis);
    fixed[i] = {ds_.location(q), std::move(p)};
  });
  out.train_fallbacks = static_cast<std::size_t>(std::count(fell_back.begin(), fell_back.end(), 1));
  if (out.train_fallbacks > 0) {
    spdlog::warn("{} training locations fell back to the mode-PMI codebook precoder", out.train_fallbacks);
  }
  out.representatives = std::move(reps);

  // One GPR per rank over representative latent means.
  for (int r : ranks) {
    std::vector<Location> locs;
    std::vector<RVector> mus;
    if (cfg_.gpr_on_fixed_subset) {
      for (const auto& rep : out.representatives) {
        if (out.fixed_ri.at(rep.q) != r) continue;
        locs.push_back(ds_.location(rep.q));
        mus.push_back(rep.latent.mu);
      }
    } else {
      const auto& model = models_.at(r).model;
      for (auto q : index_.at(r).locations) {
        locs.push_back(ds_.location(q));
        mus.push_back(pick_representative(model, index_.at(r), q, method).latent.mu);
      }
    }
    if (locs.size() < 2) continue;
    RMatrix Y(static_cast<Eigen::Index>(mus.size()), mus.front().size());
    for (std::size_t i = 0; i < mus.size(); ++i) Y.row(static_cast<Eigen::Index>(i)) = mus[i].transpose();
    GPRModel g = gpr_fit(location_matrix(locs), Y, cfg_.gpr);
    g.rank = r;
    spdlog::info("rank-{} GPR on {} locations: gamma {:.4f}, zeta {:.3f} m", r, locs.size(), g.gamma, g.zeta);
    out.gprs.emplace(r, std::move(g));
  }
  return fixed;
}

void Experiment::vae_infer_test(VaeOutcome& out) {
  const int n_tx = static_cast<int>(ds_.n_tx());
  std::vector<LocatedRank> ranks;
  std::vector<Point2> pts;
  std::vector<int> cqis;
  for (const auto& lp : out.train) {
    ranks.push_back({lp.location, lp.params.rank});
    pts.push_back(plane_point(lp.location));
    cqis.push_back(lp.params.cqi);
  }
  const Delaunay tri(pts);

  for (auto q : split_.test) {
    const Location& loc = ds_.location(q);
    const int ri = infer_ri(ranks, loc, cfg_.n_ri);
    RVector mu;
    if (auto g = out.gprs.find(ri); g != out.gprs.end()) {
      RMatrix Xq(1, 3);
      for (int c = 0; c < 3; ++c) Xq(0, c) = loc.coords[c];
      mu = gpr_predict(g->second, Xq).row(0).transpose();
    } else {
      // Fewer than two training locations with this rank: nearest one.
      const LatentRecord* best = nullptr;
      double best_d = 0.0;
      for (const auto& rep : out.representatives) {
        if (out.fixed_ri.at(rep.q) != ri) continue;
        const double d = squared_distance(ds_.location(rep.q), loc);
        if (!best || d < best_d) {
          best = &rep;
          best_d = d;
        }
      }
      mu = best->latent.mu;
    }
    LocatedParams lp{loc, {}};
    lp.params.source = ParamSource::Inferred;
    lp.params.cqi = nni_cqi(tri, cqis, plane_point(loc));
    InferredRecord rec{q, ri, lp.params.cqi, "svd-gpr"};
    try {
      lp.params.W = orthogonalize(unflatten_precoder(decode(models_.at(ri).model, mu), n_tx, ri));
      lp.params.rank = ri;
    } catch (const NumericalError&) {
      const auto nn = nearest_neighbor_infer(out.train, loc);
      lp.params.W = nn.W;
      lp.params.rank = nn.rank;
      lp.params.pmi = nn.pmi;
      rec.rank = nn.rank;
      rec.source = nn.pmi ? "codebook-nn" : "svd-gpr";
      ++out.test_fallbacks;
    }
    out.test.push_back(std::move(lp));
    out.inferred.push_back(rec);
  }
  if (out.test_fallbacks > 0) spdlog::warn("{} test locations used the nearest training precoder", out.test_fallbacks);
}

const VaeOutcome& Experiment::vae(RepresentativeMethod method) {
  auto it = vae_.find(method);
  if (it != vae_.end()) return it->second;
  VaeOutcome out;
  out.train = vae_fix_train(method, out);
  vae_infer_test(out);
  return vae_.emplace(method, std::move(out)).first->second;
}

// ---------------------------------------------------------------------------
// Evaluation stage

MetricsReport Experiment::evaluate_fixed(std::span<const LocatedParams> params, std::string scheme,
                                         std::string_view split) {
  const auto& qs = locations(split);
  std::map<std::uint32_t, const TransmissionParams*> by_q;
  for (const auto& lp : params) by_q[lp.location.q] = &lp.params;
  reader_->set_stage(kEvaluation);
  std::vector<LocationMetric> metrics(qs.size());
  const std::uint32_t T = ds_.T();
  parallel_for(qs.size(), cfg_.workers, [&](std::size_t i) {
    const auto q = qs[i];
    const auto it = by_q.find(q);
    if (it == by_q.end()) throw std::invalid_argument("no parameters for location " + std::to_string(q));
    double acc = 0.0;
    for (std::uint32_t t = 0; t < T; ++t) acc += throughput(reader_->slice(t, q), *it->second, cfg_.link);
    metrics[i] = {ds_.location(q), acc / T};
  });
  return make_report(std::move(scheme), std::string(split), std::move(metrics), cfg_.zero_threshold);
}

MetricsReport Experiment::evaluate_clsm(int delay, std::string_view split) {
  if (delay < 0) throw std::invalid_argument("delay must be non-negative");
  const auto& qs = locations(split);
  reader_->set_stage(kEvaluation);
  std::vector<std::uint32_t> missing;
  for (auto q : qs) {
    if (!clsm_eval_.count(q)) missing.push_back(q);
  }
  std::vector<std::vector<SelectionRecord>> fresh(missing.size());
  parallel_for(missing.size(), cfg_.workers, [&](std::size_t i) { fresh[i] = clsm_records(missing[i]); });
  for (std::size_t i = 0; i < missing.size(); ++i) clsm_eval_.emplace(missing[i], std::move(fresh[i]));

  std::vector<LocationMetric> metrics(qs.size());
  const std::uint32_t T = ds_.T();
  parallel_for(qs.size(), cfg_.workers, [&](std::size_t i) {
    const auto q = qs[i];
    const auto& recs = clsm_eval_.at(q);
    double acc = 0.0;
    for (std::uint32_t t = 0; t < T; ++t) {
      const std::uint32_t src = t >= static_cast<std::uint32_t>(delay) ? t - static_cast<std::uint32_t>(delay) : 0;
      acc += throughput(reader_->slice(t, q), recs[src].params, cfg_.link);
    }
    metrics[i] = {ds_.location(q), acc / T};
  });
  const std::string name = delay == 0 ? "clsm" : "clsm-delayed:" + std::to_string(delay);
  return make_report(name, std::string(split), std::move(metrics), cfg_.zero_threshold);
}

MetricsReport Experiment::evaluate(const Scheme& scheme, std::string_view split) {
  const bool train = split == "train";
  switch (scheme.kind) {
    case Scheme::Kind::Clsm: return evaluate_clsm(0, split);
    case Scheme::Kind::ClsmDelayed: return evaluate_clsm(scheme.param, split);
    case Scheme::Kind::Statfix: {
      if (train) return evaluate_fixed(statfix_train(scheme.param), scheme.name(), split);
      const auto test = statfix_test(scheme.param);
      return evaluate_fixed(test, scheme.name(), split);
    }
    case Scheme::Kind::VaeMean:
    case Scheme::Kind::VaeKl: {
      const auto method = scheme.kind == Scheme::Kind::VaeMean ? RepresentativeMethod::Mean : RepresentativeMethod::Kl;
      const auto& out = vae(method);
      return evaluate_fixed(train ? out.train : out.test, scheme.name(), split);
    }
  }
  throw std::logic_error("unhandled scheme");
}

}  // namespace fdmimo
