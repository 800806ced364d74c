#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ambient/dataio.hpp"

using namespace ambient;

namespace {

ExperimentConfig base_config(CorruptionKind kind) {
  ExperimentConfig cfg;
  cfg.data_spec = {{"family", "canonical_gmm"}, {"angle_deg", 15.0}};
  cfg.corruption.kind = kind;
  cfg.corruption.n = 2;
  cfg.corruption.p = 0.5;
  cfg.corruption.delta = 0.1;
  cfg.dataset_count = 64;
  cfg.seed = 11;
  if (kind == CorruptionKind::block_inpainting) {
    cfg.data_spec = {{"family", "canonical_gmm"}, {"angle_deg", 15.0}, {"embed_dim", 36},
                     {"embed_seed", 1}};
    cfg.corruption.n = 36;
    cfg.corruption.shape = ImageShape{6, 6, 1};
    cfg.corruption.block_size = 2;
  } else if (kind == CorruptionKind::gaussian) {
    cfg.data_spec = {{"family", "canonical_gmm"}, {"angle_deg", 15.0}, {"embed_dim", 6},
                     {"embed_seed", 1}};
    cfg.corruption.n = 6;
    cfg.corruption.m = 4;
    cfg.corruption.drop_rows = 1;
  }
  return cfg;
}

bool same_operator(const Operator& a, const Operator& b) {
  if (const Mask* ma = std::get_if<Mask>(&a)) {
    const Mask* mb = std::get_if<Mask>(&b);
    return mb && ma->diag == mb->diag;
  }
  const GaussianMeasurement& ga = std::get<GaussianMeasurement>(a);
  const GaussianMeasurement* gb = std::get_if<GaussianMeasurement>(&b);
  if (!gb || ga.row_valid != gb->row_valid || ga.rows.rows() != gb->rows.rows() ||
      ga.rows.cols() != gb->rows.cols())
    return false;
  // Measurement rows are stored as f32, so compare at float precision.
  for (long r = 0; r < ga.rows.rows(); ++r)
    for (long c = 0; c < ga.rows.cols(); ++c)
      if (static_cast<float>(ga.rows(r, c)) != static_cast<float>(gb->rows(r, c))) return false;
  return true;
}

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("dataset round trip preserves operators and measurements for all kinds") {
  for (CorruptionKind kind : {CorruptionKind::random_inpainting, CorruptionKind::block_inpainting,
                              CorruptionKind::gaussian}) {
    ExperimentConfig cfg = base_config(kind);
    GeneratedData gen = generate_dataset(cfg);
    const std::string path = "test_dataio_roundtrip.bin";
    write_dataset(path, gen.train);
    CorruptedDataset back = read_dataset(path);
    CHECK(back.kind == gen.train.kind);
    CHECK(back.n == gen.train.n);
    CHECK(back.m == gen.train.m);
    CHECK(back.digest == cfg.digest());
    REQUIRE(back.records.size() == gen.train.records.size());
    for (std::size_t i = 0; i < back.records.size(); ++i) {
      CHECK(same_operator(back.records[i].op, gen.train.records[i].op));
      // Values pass through f32; the generator keeps f64, so compare at
      // float precision.
      REQUIRE(back.records[i].y0.size() == gen.train.records[i].y0.size());
      for (int k = 0; k < back.records[i].y0.size(); ++k)
        CHECK(back.records[i].y0[k] ==
              static_cast<double>(static_cast<float>(gen.train.records[i].y0[k])));
    }
    std::remove(path.c_str());
  }
}

TEST_CASE("generation is deterministic: same seed gives bit-identical files") {
  ExperimentConfig cfg = base_config(CorruptionKind::random_inpainting);
  GeneratedData a = generate_dataset(cfg);
  GeneratedData b = generate_dataset(cfg);
  write_dataset("test_dataio_a.bin", a.train);
  write_dataset("test_dataio_b.bin", b.train);
  CHECK(slurp("test_dataio_a.bin") == slurp("test_dataio_b.bin"));
  std::remove("test_dataio_a.bin");
  std::remove("test_dataio_b.bin");

  cfg.seed = 12;
  GeneratedData c = generate_dataset(cfg);
  bool all_equal = true;
  for (std::size_t i = 0; i < a.train.records.size(); ++i)
    if (a.train.records[i].y0 != c.train.records[i].y0) all_equal = false;
  CHECK_FALSE(all_equal);
}

TEST_CASE("with p=0 the measurements reproduce the clean reference draws") {
  ExperimentConfig cfg = base_config(CorruptionKind::random_inpainting);
  cfg.corruption.p = 0.0;
  GeneratedData gen = generate_dataset(cfg);
  for (std::size_t i = 0; i < gen.train.records.size(); ++i) {
    const Mask& mask = std::get<Mask>(gen.train.records[i].op);
    CHECK(mask.num_observed() == 2);
    CHECK(gen.train.records[i].y0 == gen.reference.col(static_cast<long>(i)));
  }
}

TEST_CASE("per-coordinate observation frequency matches 1-p") {
  ExperimentConfig cfg = base_config(CorruptionKind::random_inpainting);
  cfg.corruption.p = 0.3;
  cfg.dataset_count = 4000;
  GeneratedData gen = generate_dataset(cfg);
  for (int coord = 0; coord < 2; ++coord) {
    int observed = 0;
    for (const TrainExample& ex : gen.train.records)
      if (std::get<Mask>(ex.op).observed(coord)) ++observed;
    const double freq = double(observed) / double(cfg.dataset_count);
    const double se = std::sqrt(0.3 * 0.7 / double(cfg.dataset_count));
    CHECK(std::abs(freq - 0.7) <= 3.0 * se);
  }
}

TEST_CASE("reference and sample files round trip with their digest") {
  Rng rng(7);
  Eigen::MatrixXd x(3, 20);
  for (long j = 0; j < x.cols(); ++j)
    for (long i = 0; i < x.rows(); ++i) {
      x(i, j) = rng.gaussian();
      // Store exactly representable values so the f32 round trip is exact.
      x(i, j) = static_cast<double>(static_cast<float>(x(i, j)));
    }
  const std::string digest = "0123456789abcdef";

  write_reference("test_dataio_ref.bin", x, digest);
  std::string got;
  Eigen::MatrixXd back = read_reference("test_dataio_ref.bin", &got);
  CHECK(back == x);
  CHECK(got == digest);
  std::remove("test_dataio_ref.bin");

  write_samples("test_dataio_smp.bin", x, digest);
  got.clear();
  Eigen::MatrixXd back2 = read_samples("test_dataio_smp.bin", &got);
  CHECK(back2 == x);
  CHECK(got == digest);
  std::remove("test_dataio_smp.bin");
}

TEST_CASE("the trainer path refuses eval-reference files") {
  ExperimentConfig cfg = base_config(CorruptionKind::random_inpainting);
  GeneratedData gen = generate_dataset(cfg);
  write_reference("test_dataio_refuse.bin", gen.reference, cfg.digest());
  CHECK_THROWS_AS(read_dataset("test_dataio_refuse.bin"), IoError);
  // Sample files carry the measurement magic but a raw record kind, so the
  // trainer refuses those too.
  write_samples("test_dataio_raw.bin", gen.reference, cfg.digest());
  CHECK_THROWS_AS(read_dataset("test_dataio_raw.bin"), IoError);
  // And the reference reader refuses measurement files.
  write_dataset("test_dataio_meas.bin", gen.train);
  CHECK_THROWS_AS(read_reference("test_dataio_meas.bin"), IoError);
  std::remove("test_dataio_refuse.bin");
  std::remove("test_dataio_raw.bin");
  std::remove("test_dataio_meas.bin");
}

TEST_CASE("truncated and corrupted files are diagnosed") {
  ExperimentConfig cfg = base_config(CorruptionKind::gaussian);
  GeneratedData gen = generate_dataset(cfg);
  const std::string path = "test_dataio_trunc.bin";
  write_dataset(path, gen.train);
  std::vector<std::uint8_t> bytes = slurp(path);

  for (std::size_t keep : {std::size_t(3), std::size_t(20), bytes.size() / 2}) {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(keep));
    f.close();
    CHECK_THROWS_AS(read_dataset(path), IoError);
  }

  std::vector<std::uint8_t> garbled = bytes;
  garbled[0] = 'X';
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(garbled.data()), static_cast<long>(garbled.size()));
  f.close();
  CHECK_THROWS_AS(read_dataset(path), IoError);
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_dataset("test_dataio_missing.bin"), IoError);
}

TEST_CASE("invalid digests and empty counts are rejected at write time") {
  ExperimentConfig cfg = base_config(CorruptionKind::random_inpainting);
  GeneratedData gen = generate_dataset(cfg);
  gen.train.digest = "short";
  CHECK_THROWS_AS(write_dataset("test_dataio_bad.bin", gen.train), ConfigError);
  cfg.dataset_count = 0;
  CHECK_THROWS_AS(generate_dataset(cfg), ConfigError);
}
