#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ambient/corruption.hpp"
#include "ambient/oracle.hpp"
#include "ambient/schedule.hpp"

namespace ambient {

struct OptimizerSpec {
  double lr = 1e-3;
  std::string lr_schedule = "cosine";  // constant | cosine (anneals to 0)
  int batch_size = 128;
  int steps = 6000;
  double clip_max_norm = 1.0;
  int checkpoint_every = 5000;
};

struct ModelSpec {
  int hidden_width = 256;
  int hidden_layers = 3;
};

struct SamplerSpec {
  std::string kind = "fixed_mask";  // fixed_mask | reconstruction_guidance
  double guidance_weight = 5e-4;
  int num_guidance_masks = 4;
};

// Full run specification. Persisted with every artifact via digest().
struct ExperimentConfig {
  nlohmann::json data_spec;  // kept verbatim so the file round-trips losslessly
  CorruptionProcess corruption;
  NoiseSchedule schedule;
  ModelSpec model;
  OptimizerSpec optimizer;
  SamplerSpec sampler;
  std::uint64_t seed = 1;
  std::uint64_t dataset_count = 20000;

  DataDistribution data() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);

  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  // 16-hex-digit digest of the canonical (key-sorted) dump.
  std::string digest() const;
};

nlohmann::json data_spec_from(const DataDistribution& dist);

}  // namespace ambient
