// Times the chunked kernels under the serial and OpenMP policies and prints
// a small table. Results are bitwise identical by construction; the point of
// the benchmark is the wall-clock ratio on multi-core machines.

#include <chrono>
#include <cstdio>

#include "ambient/dataio.hpp"
#include "ambient/metrics.hpp"
#include "ambient/training.hpp"

using namespace ambient;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-24s %12.2f %12.2f %10.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  ExperimentConfig cfg;
  cfg.data_spec = {{"family", "canonical_gmm"}, {"angle_deg", 15.0}, {"embed_dim", 16},
                   {"embed_seed", 1}};
  cfg.corruption.kind = CorruptionKind::random_inpainting;
  cfg.corruption.n = 16;
  cfg.corruption.p = 0.5;
  cfg.corruption.delta = 0.1;
  cfg.dataset_count = 4096;
  cfg.seed = 1;

  std::printf("%-24s %12s %12s %10s\n", "kernel", "serial ms", "openmp ms", "speedup");

  {
    auto bench = [&](ExecPolicy pol) { (void)generate_dataset(cfg, pol); };
    row("generate_dataset", time_ms([&] { bench(ExecPolicy::serial); }, 3),
        time_ms([&] { bench(ExecPolicy::parallel); }, 3));
  }

  GeneratedData gen = generate_dataset(cfg);
  InputCodec codec = codec_for(cfg.corruption);
  Mlp model(MlpArch{codec.dim(), cfg.corruption.n, cfg.model.hidden_width,
                    cfg.model.hidden_layers});
  Rng rng(2);
  model.init(rng);
  std::vector<const TrainExample*> batch;
  for (const auto& ex : gen.train.records) batch.push_back(&ex);

  {
    auto bench = [&](ExecPolicy pol) {
      (void)batch_loss(model, codec, batch, cfg.corruption, cfg.schedule, Objective::ambient, 7,
                       pol);
    };
    row("batch_loss", time_ms([&] { bench(ExecPolicy::serial); }, 3),
        time_ms([&] { bench(ExecPolicy::parallel); }, 3));
  }

  {
    Rng op_rng(3);
    Operator atilde = sample_corruption(cfg.corruption, op_rng);
    auto bench = [&](ExecPolicy pol) {
      Rng r(9);
      (void)estimate_second_moment(cfg.corruption, atilde, 100000, r, pol);
    };
    row("estimate_second_moment", time_ms([&] { bench(ExecPolicy::serial); }, 3),
        time_ms([&] { bench(ExecPolicy::parallel); }, 3));
  }

  {
    Eigen::MatrixXd x = gen.reference.leftCols(2048);
    Eigen::MatrixXd y = gen.reference.rightCols(2048);
    auto sw = [&](ExecPolicy pol) {
      Rng r(5);
      (void)sliced_wasserstein(x, y, 256, r, pol);
    };
    row("sliced_wasserstein", time_ms([&] { sw(ExecPolicy::serial); }, 3),
        time_ms([&] { sw(ExecPolicy::parallel); }, 3));
    auto ed = [&](ExecPolicy pol) { (void)energy_distance(x, y, pol); };
    row("energy_distance", time_ms([&] { ed(ExecPolicy::serial); }, 3),
        time_ms([&] { ed(ExecPolicy::parallel); }, 3));
    auto mem = [&](ExecPolicy pol) { (void)memorization_stat(x, y, pol); };
    row("memorization_stat", time_ms([&] { mem(ExecPolicy::serial); }, 3),
        time_ms([&] { mem(ExecPolicy::parallel); }, 3));
  }

  return 0;
}
