// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "fdmimo/experiment.hpp"

namespace fs = std::filesystem;
using namespace fdmimo;

namespace {

struct Options {
  ExperimentConfig cfg;
  fs::path out = "fdmimo_out";
  fs::path dataset;
  std::string sinr_form = "squared";
  fs::path cqi_table;
  bool verbose = false;
};

void add_common(CLI::App& app, Options& o) {
  auto& c = o.cfg;
  app.add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--dataset", o.dataset, "Dataset file (default <out>/dataset.bin)");
  app.add_option("--models", c.model_dir, "VAE model directory (default <out>/models)");
  app.add_option("--workers", c.workers, "Worker threads")->capture_default_str();
  app.add_option("--rows", c.scene.rows, "Training grid rows")->capture_default_str();
  app.add_option("--cols", c.scene.cols, "Training grid columns")->capture_default_str();
  app.add_option("--spacing", c.scene.spacing_m, "Grid spacing in meters")->capture_default_str();
  app.add_option("--T", c.T, "Time samples")->capture_default_str();
  app.add_option("--K", c.K, "Subcarriers")->capture_default_str();
  app.add_option("--paths", c.scene.num_paths, "Multipath components")->capture_default_str();
  app.add_option("--rays", c.scene.rays_per_path, "Sub-rays per scattered path")->capture_default_str();
  app.add_option("--cluster-radius", c.scene.cluster_radius_m, "Scatterer cluster radius in meters")
      ->capture_default_str();
  app.add_option("--k-factor-db", c.scene.k_factor_db, "Rician K-factor in dB")->capture_default_str();
  app.add_option("--jitter", c.scene.jitter, "NLoS phase jitter scale")->capture_default_str();
  app.add_option("--noise", c.scene.noise_variance, "Noise variance")->capture_default_str();
  app.add_option("--n-rx", c.scene.n_rx, "Receive antennas")->capture_default_str();
  app.add_option("--test-ratio", c.test_ratio, "Test location fraction")->capture_default_str();
  app.add_option("--alpha", c.link.alpha, "MIESM adjustment factor")->capture_default_str();
  app.add_option("--sinr-form", o.sinr_form, "squared or literal")->capture_default_str();
  app.add_option("--cqi-table", o.cqi_table, "CQI table CSV (cqi,modulation_order,efficiency)");
  app.add_option("--epochs", c.vae.epochs, "VAE epochs")->capture_default_str();
  app.add_option("--batch", c.vae.batch_size, "VAE minibatch size")->capture_default_str();
  app.add_option("--beta", c.vae.beta, "VAE KL weight")->capture_default_str();
  app.add_option("--lr", c.vae.learning_rate, "VAE learning rate")->capture_default_str();
  app.add_option("--gpr-fixed-only", c.gpr_on_fixed_subset, "Fit each GPR only on locations with that fixed RI")
      ->capture_default_str();
  app.add_flag("-v,--verbose", o.verbose, "Debug logging");
}

void finalize(Options& o) {
  if (o.verbose) spdlog::set_level(spdlog::level::debug);
  if (o.dataset.empty()) o.dataset = o.out / "dataset.bin";
  if (o.cfg.model_dir.empty()) o.cfg.model_dir = o.out / "models";
  if (o.sinr_form == "squared") {
    o.cfg.link.sinr_form = SinrForm::Squared;
  } else if (o.sinr_form == "literal") {
    o.cfg.link.sinr_form = SinrForm::Literal;
  } else {
    throw std::invalid_argument("--sinr-form must be squared or literal");
  }
  if (!o.cqi_table.empty()) o.cfg.link.cqi_table = CqiTable::load_csv(o.cqi_table);
  o.cfg.beams.n1 = o.cfg.scene.n1;
  o.cfg.beams.n2 = o.cfg.scene.n2;
  fs::create_directories(o.out);
}

ChannelDataset load_or_generate(const Options& o) {
  if (fs::exists(o.dataset)) return load_dataset(o.dataset);
  spdlog::info("generating dataset {}", o.dataset.string());
  auto ds = Experiment::make_dataset(o.cfg);
  save_dataset(ds, o.dataset);
  return ds;
}

std::string file_stem(std::string name) {
  for (char& ch : name) {
    if (ch == ':') ch = '_';
  }
  return name;
}

void emit(const MetricsReport& r, const fs::path& out) {
  const auto stem = file_stem(r.scheme) + "_" + r.split;
  write_report_csv(r, out / (stem + ".csv"));
  write_rows_csv(r, out / (stem + "_rows.csv"));
  std::cout << r.scheme << " " << r.split << ": mean " << r.overall_mean << " bits/TTI ("
            << bits_per_tti_to_mbps(r.overall_mean) << " Mbit/s), " << r.zero_throughput.size()
            << " zero-throughput locations\n";
}

void write_vae_outputs(const VaeOutcome& v, const std::string& tag, const fs::path& out) {
  write_fixed_table(v.train, out / ("vae_" + tag + "_fixed.csv"));
  write_latent_csv(v.representatives, out / ("vae_" + tag + "_representatives.csv"));
  for (const auto& [r, g] : v.gprs) save_gpr(g, out / ("gpr_" + tag + "_rank" + std::to_string(r) + ".bin"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback-free MIMO transmission-parameter selection"};
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  add_common(app, o);

  auto* gen = app.add_subcommand("gen", "Generate the synthetic channel dataset");
  auto* cb = app.add_subcommand("codebook", "Write the Type I codebook as CSV");
  int max_rank = kMaxCodebookRank;
  cb->add_option("--max-rank", max_rank, "Highest rank")->capture_default_str();

  auto* clsm = app.add_subcommand("clsm", "Closed-loop codebook baseline");
  int delay = 0;
  clsm->add_option("--delay", delay, "Feedback delay in TTIs")->capture_default_str();

  auto* statfix = app.add_subcommand("statfix", "Statistic-based codebook fixing with nearest-neighbour inference");
  int variant = 3;
  statfix->add_option("--variant", variant, "1, 2 or 3")->check(CLI::Range(1, 3))->capture_default_str();

  auto* vtrain = app.add_subcommand("vae-train", "Train the VAE for one rank");
  int rank = 1;
  vtrain->add_option("--rank", rank, "Rank")->required();

  auto* vfix = app.add_subcommand("vae-fix", "Fix rank, precoder and CQI on the training grid");
  std::string method = "mean";
  vfix->add_option("--method", method, "mean or kl")->check(CLI::IsMember({"mean", "kl"}))->capture_default_str();
  vfix->add_option("--cthold", o.cfg.c_thold, "Rank-fixing threshold in percent")->capture_default_str();

  auto* infer = app.add_subcommand("infer", "Infer parameters at test locations");
  infer->add_option("--nri", o.cfg.n_ri, "Neighbours for rank inference")->capture_default_str();
  infer->add_option("--method", method, "mean or kl")->check(CLI::IsMember({"mean", "kl"}))->capture_default_str();
  infer->add_option("--cthold", o.cfg.c_thold, "Rank-fixing threshold in percent")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Evaluate one scheme on train and test locations");
  std::string scheme_text = "clsm";
  eval->add_option("--scheme", scheme_text, "clsm | clsm-delayed:d | statfix:v | vae:mean | vae:kl")->required();
  eval->add_option("--nri", o.cfg.n_ri, "Neighbours for rank inference")->capture_default_str();
  eval->add_option("--cthold", o.cfg.c_thold, "Rank-fixing threshold in percent")->capture_default_str();

  auto* report = app.add_subcommand("report", "Compare per-location report CSVs against the first one");
  std::vector<fs::path> inputs;
  std::vector<std::string> names;
  fs::path report_dir;
  report->add_option("inputs", inputs, "Report CSVs, baseline first")->required()->check(CLI::ExistingFile);
  report->add_option("--names", names, "Scheme names (default: file stems)");
  report->add_option("--dir", report_dir, "Output directory (default <out>/report)");

  CLI11_PARSE(app, argc, argv);

  try {
    finalize(o);
    if (*gen) {
      auto ds = Experiment::make_dataset(o.cfg);
      save_dataset(ds, o.dataset);
      std::cout << "wrote " << o.dataset.string() << " (" << ds.Q() << " locations, " << ds.T() << " x " << ds.K()
                << " samples)\n";
      return 0;
    }
    if (*cb) {
      const Codebook book(o.cfg.beams, max_rank);
      write_codebook_csv(book, o.out / "codebook.csv");
      std::cout << "wrote " << book.size() << " entries, " << book.beams().size() << " beams\n";
      return 0;
    }
    if (*report) {
      if (!names.empty() && names.size() != inputs.size()) throw std::invalid_argument("one name per input");
      std::vector<MetricsReport> reports;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto name = names.empty() ? inputs[i].stem().string() : names[i];
        reports.push_back(read_report_csv(inputs[i], name, "", o.cfg.zero_threshold));
      }
      const auto dir = report_dir.empty() ? o.out / "report" : report_dir;
      write_comparison(reports, dir);
      write_summary(reports, std::cout);
      return 0;
    }

    Experiment exp(o.cfg, load_or_generate(o));
    if (*clsm) {
      write_selection_csv(exp.clsm_train(), o.out / "clsm_selections.csv");
      for (const char* split : {"train", "test"}) emit(exp.evaluate_clsm(delay, split), o.out);
    } else if (*statfix) {
      const Scheme s{Scheme::Kind::Statfix, variant};
      write_fixed_table(exp.statfix_train(variant), o.out / ("statfix_" + std::to_string(variant) + "_fixed.csv"));
      std::vector<InferredRecord> inferred;
      for (const auto& lp : exp.statfix_test(variant)) {
        inferred.push_back({lp.location.q, lp.params.rank, lp.params.cqi, "codebook-nn"});
      }
      write_inferred_csv(inferred, o.out / ("statfix_" + std::to_string(variant) + "_inferred.csv"));
      for (const char* split : {"train", "test"}) emit(exp.evaluate(s, split), o.out);
    } else if (*vtrain) {
      if (rank < 1 || rank > exp.max_rank()) throw std::invalid_argument("rank out of range");
      const auto& idx = exp.precoder_index(rank);
      const auto& res = exp.vae_model(rank);
      std::vector<LatentRecord> latents;
      for (std::size_t i = 0; i < idx.keys.size(); ++i) {
        latents.push_back({idx.keys[i].first, idx.keys[i].second,
                           encode(res.model, idx.samples.col(static_cast<Eigen::Index>(i)))});
      }
      write_latent_csv(latents, o.out / ("vae_rank" + std::to_string(rank) + "_latents.csv"));
      std::cout << "rank " << rank << ": " << idx.sample_count() << " samples, model in "
                << o.cfg.model_dir.string() << "\n";
    } else if (*vfix || *infer) {
      const auto m = method == "kl" ? RepresentativeMethod::Kl : RepresentativeMethod::Mean;
      const auto& v = exp.vae(m);
      write_vae_outputs(v, method, o.out);
      if (*infer) write_inferred_csv(v.inferred, o.out / ("vae_" + method + "_inferred.csv"));
      std::cout << "fixed " << v.train.size() << " training locations, inferred " << v.test.size()
                << " test locations (" << v.train_fallbacks + v.test_fallbacks << " fallbacks)\n";
    } else if (*eval) {
      const auto s = Scheme::parse(scheme_text);
      for (const char* split : {"train", "test"}) emit(exp.evaluate(s, split), o.out);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
