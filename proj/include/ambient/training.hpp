#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "ambient/config.hpp"
#include "ambient/corruption.hpp"
#include "ambient/mlp.hpp"
#include "ambient/oracle.hpp"
#include "ambient/parallel.hpp"
#include "ambient/schedule.hpp"

namespace ambient {

enum class Objective { ambient, naive, clean };

Objective objective_from_name(const std::string& name);
std::string objective_name(Objective obj);

// One training record: the measurement A x0 and the operator that produced
// it. Clean data never appears here; the further corruption, noise draw and
// time are resampled every time the example is visited.
struct TrainExample {
  Eigen::VectorXd y0;
  Operator op;
};

struct LossResult {
  double loss = 0.0;
  Eigen::VectorXd grad;
  double grad_norm = 0.0;
};

// Batch loss and parameter gradient. Per-example randomness is derived from
// (noise_seed, slot index), and per-chunk partial sums are combined in chunk
// order, so the result is identical under both execution policies.
LossResult batch_loss(const Mlp& model, const InputCodec& codec,
                      const std::vector<const TrainExample*>& batch,
                      const CorruptionProcess& proc, const NoiseSchedule& sched, Objective obj,
                      std::uint64_t noise_seed, ExecPolicy policy = ExecPolicy::serial);

// In-place norm clipping; returns the pre-clip norm.
double clip_gradient(Eigen::VectorXd& grad, double max_norm);

struct AdamState {
  Eigen::VectorXd m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

void adam_step(Mlp& model, AdamState& state, const Eigen::VectorXd& grad, double lr);

// Fixed held-out (Atilde, y_t, sigma) triples with precomputed oracle
// targets, for run-to-run comparable oracle-gap numbers.
struct EvalTriple {
  Operator atilde;
  Eigen::VectorXd y;
  double sigma = 0.0;
  Eigen::VectorXd oracle;
  Eigen::VectorXd x0;  // the clean draw behind the triple (evaluation only)
};

std::vector<EvalTriple> make_eval_triples(const DataDistribution& dist,
                                          const CorruptionProcess& proc,
                                          const std::vector<double>& sigmas, int count, Rng& rng);

// Mean over triples of |h - oracle| / (1 + |oracle|).
double oracle_gap(const Mlp& model, const InputCodec& codec,
                  const std::vector<EvalTriple>& triples);

struct TrainOptions {
  Objective objective = Objective::ambient;
  std::string checkpoint_path;  // empty = no checkpoints
  std::string metrics_path;     // empty = no metrics log
  std::string config_digest;
  ExecPolicy policy = ExecPolicy::serial;
  const DataDistribution* oracle_dist = nullptr;  // enables the oracle-gap column
  int metrics_every = 100;
  int steps_override = -1;  // >= 0 replaces config steps
};

struct TrainResult {
  Mlp model;
  double final_loss = 0.0;
  int steps_run = 0;
  bool diverged = false;
};

TrainResult train(const ExperimentConfig& cfg, const std::vector<TrainExample>& dataset,
                  const TrainOptions& opts);

InputCodec codec_for(const CorruptionProcess& proc);

}  // namespace ambient
