#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ambient/dataio.hpp"
#include "ambient/metrics.hpp"
#include "ambient/training.hpp"

using namespace ambient;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.data_spec = {{"family", "canonical_gmm"}, {"angle_deg", 15.0}};
  cfg.corruption.kind = CorruptionKind::random_inpainting;
  cfg.corruption.n = 2;
  cfg.corruption.p = 0.5;
  cfg.corruption.delta = 0.1;
  cfg.model.hidden_width = 16;
  cfg.model.hidden_layers = 2;
  cfg.dataset_count = 256;
  cfg.seed = 21;
  return cfg;
}

Eigen::MatrixXd gaussian_cloud(int n, int count, Rng& rng) {
  Eigen::MatrixXd x(n, count);
  for (int j = 0; j < count; ++j)
    for (int i = 0; i < n; ++i) x(i, j) = rng.gaussian();
  return x;
}

}  // namespace

TEST_CASE("chunk decomposition covers the range exactly once") {
  for (std::size_t count : {std::size_t(0), std::size_t(1), std::size_t(15), std::size_t(16),
                            std::size_t(17), std::size_t(1000)}) {
    std::vector<int> hits(count, 0);
    for_each_chunk(ExecPolicy::serial, count, kDefaultChunks,
                   [&](std::size_t, std::size_t b, std::size_t e) {
                     for (std::size_t i = b; i < e; ++i) ++hits[i];
                   });
    for (int h : hits) CHECK(h == 1);
  }
}

TEST_CASE("batch loss is bitwise identical under both policies") {
  ExperimentConfig cfg = small_config();
  GeneratedData gen = generate_dataset(cfg);
  InputCodec codec = codec_for(cfg.corruption);
  Mlp model(MlpArch{codec.dim(), 2, 16, 2});
  Rng rng(3);
  model.init(rng);
  Rng head(4);
  for (int i = 0; i < model.param_count(); ++i)
    if (model.theta()[i] == 0.0) model.theta()[i] = 0.05 * head.gaussian();
  model.round_params_to_f32();
  std::vector<const TrainExample*> batch;
  for (const auto& ex : gen.train.records) batch.push_back(&ex);

  for (Objective obj : {Objective::ambient, Objective::naive, Objective::clean}) {
    LossResult s = batch_loss(model, codec, batch, cfg.corruption, cfg.schedule, obj, 7,
                              ExecPolicy::serial);
    LossResult p = batch_loss(model, codec, batch, cfg.corruption, cfg.schedule, obj, 7,
                              ExecPolicy::parallel);
    CHECK(s.loss == p.loss);
    CHECK(s.grad == p.grad);
  }
}

TEST_CASE("dataset generation is bitwise identical under both policies") {
  ExperimentConfig cfg = small_config();
  GeneratedData s = generate_dataset(cfg, ExecPolicy::serial);
  GeneratedData p = generate_dataset(cfg, ExecPolicy::parallel);
  CHECK(s.reference == p.reference);
  REQUIRE(s.train.records.size() == p.train.records.size());
  for (std::size_t i = 0; i < s.train.records.size(); ++i) {
    CHECK(s.train.records[i].y0 == p.train.records[i].y0);
    CHECK(std::get<Mask>(s.train.records[i].op).diag ==
          std::get<Mask>(p.train.records[i].op).diag);
  }
}

TEST_CASE("second-moment estimation is bitwise identical under both policies") {
  CorruptionProcess proc;
  proc.kind = CorruptionKind::random_inpainting;
  proc.n = 4;
  proc.p = 0.4;
  proc.delta = 0.2;
  Rng rng(5);
  Operator atilde = sample_corruption(proc, rng);
  Rng rs(9), rp(9);
  MomentEstimate s = estimate_second_moment(proc, atilde, 2048, rs, ExecPolicy::serial);
  MomentEstimate p = estimate_second_moment(proc, atilde, 2048, rp, ExecPolicy::parallel);
  CHECK(s.mean == p.mean);
  CHECK(s.std_error == p.std_error);
}

TEST_CASE("distribution metrics are bitwise identical under both policies") {
  Rng rng(13);
  Eigen::MatrixXd x = gaussian_cloud(3, 300, rng);
  Eigen::MatrixXd y = gaussian_cloud(3, 300, rng);
  Rng ps(1), pp(1);
  CHECK(sliced_wasserstein(x, y, 64, ps, ExecPolicy::serial) ==
        sliced_wasserstein(x, y, 64, pp, ExecPolicy::parallel));
  CHECK(energy_distance(x, y, ExecPolicy::serial) ==
        energy_distance(x, y, ExecPolicy::parallel));

  MemorizationStat ms = memorization_stat(x, y, ExecPolicy::serial);
  MemorizationStat mp = memorization_stat(x, y, ExecPolicy::parallel);
  CHECK(ms.similarities == mp.similarities);
  CHECK(ms.p50 == mp.p50);
  CHECK(ms.histogram == mp.histogram);
}

TEST_CASE("training end to end is bitwise identical under both policies") {
  ExperimentConfig cfg = small_config();
  cfg.optimizer.steps = 8;
  cfg.optimizer.batch_size = 32;
  cfg.optimizer.checkpoint_every = 0;
  GeneratedData gen = generate_dataset(cfg);
  TrainOptions serial_opts, parallel_opts;
  serial_opts.policy = ExecPolicy::serial;
  parallel_opts.policy = ExecPolicy::parallel;
  TrainResult s = train(cfg, gen.train.records, serial_opts);
  TrainResult p = train(cfg, gen.train.records, parallel_opts);
  CHECK(s.model.theta() == p.model.theta());
  CHECK(s.final_loss == p.final_loss);
}
