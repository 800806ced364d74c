#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "ambient/config.hpp"
#include "ambient/dataio.hpp"
#include "ambient/metrics.hpp"
#include "ambient/oracle.hpp"
#include "ambient/sampler.hpp"
#include "ambient/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ambient;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int steps = -1;
  std::string sampler_kind;
  std::string objective = "ambient";
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* c = cmd->add_option("--config", flags.config_path, "experiment config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "seed override")->each([&](const std::string&) {
    flags.seed_set = true;
  });
}

ExperimentConfig load_config(const CommonFlags& flags) {
  ExperimentConfig cfg = ExperimentConfig::load(flags.config_path);
  if (flags.seed_set) cfg.seed = flags.seed;
  return cfg;
}

void write_summary(const std::string& out_dir, const std::string& name, json j) {
  fs::create_directories(out_dir);
  std::ofstream f(out_dir + "/" + name);
  if (!f) throw IoError("cannot write summary in " + out_dir);
  f << j.dump(2) << "\n";
  std::cout << j.dump() << "\n";
}

void require_digest(const std::string& artifact, const std::string& got,
                    const std::string& want) {
  if (got != want)
    throw UsageError(artifact + " was produced under config digest " + got +
                     ", current config has " + want);
}

Restorer model_restorer(std::shared_ptr<Mlp> model, InputCodec codec) {
  return [model, codec](const Operator& atilde, const Eigen::VectorXd& y, double sigma) {
    return model->forward(codec.encode(atilde, y, sigma));
  };
}

Restorer oracle_restorer(std::shared_ptr<DataDistribution> dist) {
  return [dist](const Operator& atilde, const Eigen::VectorXd& y, double sigma) {
    return posterior_mean(*dist, atilde, y, sigma);
  };
}

SamplerConfig sampler_config(const ExperimentConfig& cfg, const std::string& kind_override,
                             Restorer restorer) {
  SamplerConfig sc;
  std::string kind = cfg.sampler.kind;
  if (!kind_override.empty())
    kind = kind_override == "fixed" ? "fixed_mask" : "reconstruction_guidance";
  if (kind == "fixed_mask")
    sc.kind = SamplerKind::fixed_mask;
  else if (kind == "reconstruction_guidance")
    sc.kind = SamplerKind::reconstruction_guidance;
  else
    throw UsageError("unknown sampler kind: " + kind);
  sc.schedule = cfg.schedule;
  sc.guidance_weight = cfg.sampler.guidance_weight;
  sc.num_guidance_masks = cfg.sampler.num_guidance_masks;
  sc.restorer = std::move(restorer);
  return sc;
}

int cmd_gen_data(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  GeneratedData data = generate_dataset(cfg);
  fs::create_directories(flags.out_dir);
  const std::string digest = cfg.digest();
  write_dataset(flags.out_dir + "/dataset.bin", data.train);
  write_reference(flags.out_dir + "/reference.bin", data.reference, digest);
  cfg.save(flags.out_dir + "/config.json");
  write_summary(flags.out_dir, "gen_data_summary.json",
                {{"command", "gen-data"},
                 {"config_digest", digest},
                 {"records", data.train.records.size()},
                 {"dataset", flags.out_dir + "/dataset.bin"},
                 {"reference", flags.out_dir + "/reference.bin"}});
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& data_path) {
  ExperimentConfig cfg = load_config(flags);
  const std::string digest = cfg.digest();
  std::string path = data_path.empty() ? flags.out_dir + "/dataset.bin" : data_path;
  CorruptedDataset ds = read_dataset(path);
  require_digest("dataset " + path, ds.digest, digest);
  fs::create_directories(flags.out_dir);

  TrainOptions opts;
  opts.objective = objective_from_name(flags.objective);
  opts.checkpoint_path = flags.out_dir + "/model.ckpt";
  opts.metrics_path = flags.out_dir + "/metrics.csv";
  opts.config_digest = digest;
  opts.steps_override = flags.steps;
  TrainResult result = train(cfg, ds.records, opts);

  write_summary(flags.out_dir, "train_summary.json",
                {{"command", "train"},
                 {"config_digest", digest},
                 {"objective", flags.objective},
                 {"steps_run", result.steps_run},
                 {"final_loss", result.final_loss},
                 {"diverged", result.diverged},
                 {"checkpoint", opts.checkpoint_path}});
  return result.diverged ? 1 : 0;
}

int cmd_sample(const CommonFlags& flags, const std::string& model_path, int count) {
  ExperimentConfig cfg = load_config(flags);
  const std::string digest = cfg.digest();
  std::string path = model_path.empty() ? flags.out_dir + "/model.ckpt" : model_path;
  std::string model_digest;
  auto model = std::make_shared<Mlp>(Mlp::load(path, &model_digest));
  require_digest("checkpoint " + path, model_digest, digest);

  SamplerConfig sc = sampler_config(cfg, flags.sampler_kind, model_restorer(model, codec_for(cfg.corruption)));
  Rng rng = Rng::derive(cfg.seed, 0x5A3F11ULL);
  Eigen::MatrixXd samples(cfg.corruption.n, count);
  for (int i = 0; i < count; ++i)
    samples.col(i) = sc.kind == SamplerKind::fixed_mask ? fixed_mask_sample(sc, cfg.corruption, rng)
                                                        : guided_sample(sc, cfg.corruption, rng);
  fs::create_directories(flags.out_dir);
  write_samples(flags.out_dir + "/samples.bin", samples, digest);
  write_summary(flags.out_dir, "sample_summary.json",
                {{"command", "sample"},
                 {"config_digest", digest},
                 {"count", count},
                 {"samples", flags.out_dir + "/samples.bin"}});
  return 0;
}

int cmd_restore(const CommonFlags& flags, const std::string& model_path,
                const std::string& data_path, double sigma) {
  ExperimentConfig cfg = load_config(flags);
  const std::string digest = cfg.digest();
  std::string mpath = model_path.empty() ? flags.out_dir + "/model.ckpt" : model_path;
  std::string model_digest;
  auto model = std::make_shared<Mlp>(Mlp::load(mpath, &model_digest));
  require_digest("checkpoint " + mpath, model_digest, digest);
  std::string dpath = data_path.empty() ? flags.out_dir + "/dataset.bin" : data_path;
  CorruptedDataset ds = read_dataset(dpath);
  require_digest("dataset " + dpath, ds.digest, digest);

  InputCodec codec = codec_for(cfg.corruption);
  Eigen::MatrixXd restored(cfg.corruption.n, static_cast<long>(ds.records.size()));
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    restored.col(static_cast<long>(i)) =
        model->forward(codec.encode(ds.records[i].op, ds.records[i].y0, sigma));
  fs::create_directories(flags.out_dir);
  write_samples(flags.out_dir + "/restored.bin", restored, digest);
  write_summary(flags.out_dir, "restore_summary.json",
                {{"command", "restore"},
                 {"config_digest", digest},
                 {"sigma", sigma},
                 {"count", ds.records.size()},
                 {"restored", flags.out_dir + "/restored.bin"}});
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& samples_path,
             const std::string& reference_path) {
  ExperimentConfig cfg = load_config(flags);
  const std::string digest = cfg.digest();
  std::string spath = samples_path.empty() ? flags.out_dir + "/samples.bin" : samples_path;
  std::string rpath = reference_path.empty() ? flags.out_dir + "/reference.bin" : reference_path;
  std::string sdig, rdig;
  Eigen::MatrixXd samples = read_samples(spath, &sdig);
  Eigen::MatrixXd reference = read_reference(rpath, &rdig);
  require_digest("samples " + spath, sdig, digest);
  require_digest("reference " + rpath, rdig, digest);

  Rng rng = Rng::derive(cfg.seed, 0xE7A1ULL);
  MetricReport report;
  report.sliced_wasserstein = sliced_wasserstein(samples, reference, 128, rng);
  report.energy_distance = energy_distance(samples, reference);
  MemorizationStat stat = memorization_stat(samples, reference);
  report.nn_p50 = stat.p50;
  report.nn_p90 = stat.p90;
  report.nn_p99 = stat.p99;
  report.n_generated = static_cast<std::size_t>(samples.cols());
  report.n_reference = static_cast<std::size_t>(reference.cols());
  report.config_digest = digest;

  fs::create_directories(flags.out_dir);
  write_report_csv(flags.out_dir + "/report.csv", report);
  write_report_json(flags.out_dir + "/report.json", report, &stat);
  write_histogram_svg(flags.out_dir + "/nn_histogram.svg", stat);
  std::cout << "sliced_wasserstein=" << report.sliced_wasserstein
            << " energy_distance=" << report.energy_distance << " nn_p50=" << report.nn_p50
            << "\n";
  return 0;
}

int cmd_oracle_check(const CommonFlags& flags) {
  GmmDistribution gmm;
  if (!flags.config_path.empty()) {
    ExperimentConfig cfg = load_config(flags);
    DataDistribution dist = cfg.data();
    const auto* g = std::get_if<GmmDistribution>(&dist);
    if (!g) throw UsageError("oracle-check needs a GMM data family");
    gmm = *g;
  } else {
    gmm = canonical_gmm();
  }
  const int n = gmm.dim();
  NoiseSchedule sched;
  Rng rng(12345);
  double max_rel = 0.0;
  Mask full = Mask::ones(n);
  for (double t : sched.grid_times()) {
    const double sigma = sched.sigma(t);
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) x[i] = 2.0 * rng.gaussian();
      Eigen::VectorXd denoised = gmm_posterior_mean(gmm, Operator{full}, x, sigma);
      Eigen::VectorXd via_denoiser = score_from_denoiser(denoised, x, sigma);
      Eigen::VectorXd direct = gmm_marginal_score(gmm, x, sigma);
      const double rel = (via_denoiser - direct).norm() / (1e-30 + direct.norm());
      max_rel = std::max(max_rel, rel);
    }
  }
  std::cout << "tweedie_max_rel_err=" << max_rel << "\n";
  if (!flags.out_dir.empty())
    write_summary(flags.out_dir, "oracle_check_summary.json",
                  {{"command", "oracle-check"},
                   {"tweedie_max_rel_err", max_rel},
                   {"pass", max_rel < 1e-6}});
  return max_rel < 1e-6 ? 0 : 1;
}

int cmd_diagnose_moment(const CommonFlags& flags, std::size_t draws) {
  ExperimentConfig cfg = load_config(flags);
  const CorruptionProcess& proc = cfg.corruption;
  Rng rng = Rng::derive(cfg.seed, 0xD1A6ULL);
  Operator a = sample_corruption(proc, rng);
  Operator atilde = further_corrupt(a, proc, rng);
  MomentEstimate est = estimate_second_moment(proc, atilde, draws, rng);

  json j = {{"command", "diagnose-moment"},
            {"config_digest", cfg.digest()},
            {"draws", draws}};
  if (proc.kind == CorruptionKind::block_inpainting) {
    // No closed form; report the Monte-Carlo diagonal alone.
    std::vector<double> diag;
    for (int i = 0; i < proc.n; ++i) diag.push_back(est.mean(i, i));
    j["mc_diagonal"] = diag;
    write_summary(flags.out_dir, "diagnose_moment_summary.json", j);
    return 0;
  }

  Eigen::MatrixXd closed = conditional_second_moment(proc, atilde);
  double worst = 0.0;
  for (int r = 0; r < closed.rows(); ++r)
    for (int c = 0; c < closed.cols(); ++c) {
      const double se = std::max(est.std_error(r, c), 1e-12);
      worst = std::max(worst, std::abs(est.mean(r, c) - closed(r, c)) / se);
    }
  const bool pass = worst <= 3.0;
  j["max_deviation_in_se"] = worst;
  j["pass"] = pass;
  write_summary(flags.out_dir, "diagnose_moment_summary.json", j);
  std::cout << "max_deviation_in_se=" << worst << "\n";
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ambient: generative modeling from corrupted measurements"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string data_path, model_path, samples_path, reference_path;
  int count = 1000;
  double restore_sigma = 0.05;
  std::size_t draws = 100000;

  auto* gen = app.add_subcommand("gen-data", "synthesize a corrupted dataset");
  add_common(gen, flags);

  auto* tr = app.add_subcommand("train", "train a restorer on measurements");
  add_common(tr, flags);
  tr->add_option("--steps", flags.steps, "step-count override");
  tr->add_option("--objective", flags.objective, "ambient | naive | clean")
      ->check(CLI::IsMember({"ambient", "naive", "clean"}));
  tr->add_option("--data", data_path, "dataset path (default <out>/dataset.bin)");

  auto* sa = app.add_subcommand("sample", "draw samples from a trained model");
  add_common(sa, flags);
  sa->add_option("--sampler", flags.sampler_kind, "fixed | guided")
      ->check(CLI::IsMember({"fixed", "guided"}));
  sa->add_option("--model", model_path, "checkpoint path (default <out>/model.ckpt)");
  sa->add_option("--count", count, "number of samples");

  auto* re = app.add_subcommand("restore", "one-step restoration of a measurement file");
  add_common(re, flags);
  re->add_option("--model", model_path, "checkpoint path (default <out>/model.ckpt)");
  re->add_option("--data", data_path, "dataset path (default <out>/dataset.bin)");
  re->add_option("--sigma", restore_sigma, "noise level assumed on the measurements");

  auto* ev = app.add_subcommand("eval", "distributional metrics for a sample file");
  add_common(ev, flags);
  ev->add_option("--samples", samples_path, "sample file (default <out>/samples.bin)");
  ev->add_option("--reference", reference_path, "reference file (default <out>/reference.bin)");

  auto* oc = app.add_subcommand("oracle-check", "Tweedie consistency of the analytic oracle");
  add_common(oc, flags, false);

  auto* dm = app.add_subcommand("diagnose-moment",
                                "Monte-Carlo vs closed-form conditional second moment");
  add_common(dm, flags);
  dm->add_option("--draws", draws, "Monte-Carlo sample count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(flags);
    if (tr->parsed()) return cmd_train(flags, data_path);
    if (sa->parsed()) return cmd_sample(flags, model_path, count);
    if (re->parsed()) return cmd_restore(flags, model_path, data_path, restore_sigma);
    if (ev->parsed()) return cmd_eval(flags, samples_path, reference_path);
    if (oc->parsed()) return cmd_oracle_check(flags);
    if (dm->parsed()) return cmd_diagnose_moment(flags, draws);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
