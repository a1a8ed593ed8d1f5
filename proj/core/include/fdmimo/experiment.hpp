// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fdmimo/channel.hpp"
#include "fdmimo/codebook.hpp"
#include "fdmimo/gpr.hpp"
#include "fdmimo/linkphy.hpp"
#include "fdmimo/metrics.hpp"
#include "fdmimo/parallel.hpp"
#include "fdmimo/selection.hpp"
#include "fdmimo/spatial.hpp"
#include "fdmimo/statfix.hpp"
#include "fdmimo/vae.hpp"

namespace fdmimo {

enum class RepresentativeMethod { Mean, Kl };

struct Scheme {
  enum class Kind { Clsm, ClsmDelayed, Statfix, VaeMean, VaeKl };
  Kind kind = Kind::Clsm;
  int param = 0;  // delay in TTIs for clsm-delayed, variant for statfix

  /// clsm | clsm-delayed:d | statfix:v | vae:mean | vae:kl
  static Scheme parse(std::string_view text);
  std::string name() const;
};

struct ExperimentConfig {
  SceneConfig scene;
  std::uint32_t T = 50;
  std::uint32_t K = 24;
  double test_ratio = 0.2;
  BeamConfig beams;
  LinkConfig link;  // noise variance is taken from the scene
  VAEConfig vae;
  GPRConfig gpr;
  double c_thold = 100.0;
  int n_ri = 4;
  bool gpr_on_fixed_subset = true;  // false: fit on every rank-compatible location
  double zero_threshold = 1.0;      // bits per TTI
  int workers = default_workers();
  std::uint64_t seed = 1;
  std::filesystem::path model_dir;  // VAE models are loaded from / saved to here when set

  void validate() const;
};

/// Everything the SVD pipeline fixes on the training grid and infers on the
/// test grid for one representative-latent method.
struct VaeOutcome {
  std::map<std::uint32_t, int> fixed_ri;
  std::vector<LocatedParams> train;  // ascending q
  std::vector<LatentRecord> representatives;
  std::vector<LocatedParams> test;
  std::vector<InferredRecord> inferred;
  std::map<int, GPRModel> gprs;
  std::size_t train_fallbacks = 0;
  std::size_t test_fallbacks = 0;
};

/// Pipeline orchestration with cached intermediate results. Every channel
/// read goes through reader(); fixing and training run under the stage
/// "fixing" and only touch training locations, evaluation runs under
/// "evaluation".
class Experiment {
 public:
  Experiment(ExperimentConfig cfg, ChannelDataset ds);

  static ChannelDataset make_dataset(const ExperimentConfig& cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const ChannelDataset& dataset() const { return ds_; }
  const ChannelReader& reader() const { return *reader_; }
  const GridSplit& split() const { return split_; }
  const Codebook& codebook() const { return codebook_; }
  int max_rank() const;
  const std::vector<std::uint32_t>& locations(std::string_view split) const;

  // Fixing stage, training locations only. Records are indexed i * T + t for
  // the i-th training location.
  const std::vector<SelectionRecord>& clsm_train();
  const std::vector<SelectionRecord>& svd_train();
  const std::vector<ParamHistory>& statfix_histories();
  const std::vector<LocatedParams>& statfix_train(int variant);
  std::vector<LocatedParams> statfix_test(int variant);
  const std::vector<RankHistory>& rank_histories();
  const std::map<std::uint32_t, int>& fixed_ranks();
  const PrecoderDatasetIndex& precoder_index(int rank);
  const TrainResult& vae_model(int rank);
  const VaeOutcome& vae(RepresentativeMethod method);

  // Evaluation stage.
  MetricsReport evaluate(const Scheme& scheme, std::string_view split);
  MetricsReport evaluate_clsm(int delay, std::string_view split);
  MetricsReport evaluate_fixed(std::span<const LocatedParams> params, std::string scheme, std::string_view split);

 private:
  std::vector<SelectionRecord> clsm_records(std::uint32_t q);
  std::vector<LocatedParams> vae_fix_train(RepresentativeMethod method, VaeOutcome& out);
  void vae_infer_test(VaeOutcome& out);
  std::uint64_t derived_seed(std::uint64_t salt) const;

  ExperimentConfig cfg_;
  ChannelDataset ds_;
  std::unique_ptr<ChannelReader> reader_;
  GridSplit split_;
  Codebook codebook_;

  std::optional<std::vector<SelectionRecord>> clsm_train_;
  std::optional<std::vector<SelectionRecord>> svd_train_;
  std::optional<std::vector<ParamHistory>> statfix_hist_;
  std::map<int, std::vector<LocatedParams>> statfix_train_;
  std::optional<std::vector<RankHistory>> rank_hist_;
  std::optional<std::map<std::uint32_t, int>> fixed_ri_;
  std::map<int, PrecoderDatasetIndex> index_;
  std::map<int, TrainResult> models_;
  std::map<RepresentativeMethod, VaeOutcome> vae_;
  std::map<std::uint32_t, std::vector<SelectionRecord>> clsm_eval_;
};

}  // namespace fdmimo
