#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ambient/config.hpp"
#include "ambient/training.hpp"

namespace ambient {

// Binary dataset format: magic "AMBD", version u16, kind tag u8, config
// digest (16 ASCII hex chars), n/m/count as 64-bit little-endian unsigned,
// then per-record operator encoding followed by 32-bit-float measurement
// values. The eval-reference file is identical but carries magic "AMBR" so
// the trainer can refuse it.

struct CorruptedDataset {
  std::vector<TrainExample> records;
  CorruptionKind kind = CorruptionKind::random_inpainting;
  int n = 0, m = 0;
  std::string digest;
};

void write_dataset(const std::string& path, const CorruptedDataset& ds);
CorruptedDataset read_dataset(const std::string& path);

// Clean x0 draws, evaluation only. Columns are samples.
void write_reference(const std::string& path, const Eigen::MatrixXd& x0, const std::string& digest);
Eigen::MatrixXd read_reference(const std::string& path, std::string* digest = nullptr);

// Generated sample batches reuse the dataset container with a raw-vector
// record kind.
void write_samples(const std::string& path, const Eigen::MatrixXd& samples,
                   const std::string& digest);
Eigen::MatrixXd read_samples(const std::string& path, std::string* digest = nullptr);

struct GeneratedData {
  CorruptedDataset train;
  Eigen::MatrixXd reference;  // clean draws, one column per record
};

// Draws x0 from the configured distribution, corrupts once, and keeps the
// clean draw only in the reference block. Record-level randomness comes from
// per-record derived streams, so the output is independent of the policy.
GeneratedData generate_dataset(const ExperimentConfig& cfg, ExecPolicy policy = ExecPolicy::serial);

}  // namespace ambient
