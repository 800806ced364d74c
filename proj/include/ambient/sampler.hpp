#pragma once

#include <Eigen/Dense>
#include <functional>

#include "ambient/corruption.hpp"
#include "ambient/errors.hpp"
#include "ambient/rng.hpp"
#include "ambient/schedule.hpp"

namespace ambient {

// Restoration function (Atilde, y, sigma) -> estimate of x0 in R^n. Either a
// trained model or an analytic oracle; the samplers never care which.
using Restorer =
    std::function<Eigen::VectorXd(const Operator&, const Eigen::VectorXd&, double)>;

// Optional exact input-gradient path: returns d<cot, restorer(At, At x, s)>/dx.
using RestorerVjp = std::function<Eigen::VectorXd(
    const Operator&, const Eigen::VectorXd& x, double sigma, const Eigen::VectorXd& cotangent)>;

enum class SamplerKind { fixed_mask, reconstruction_guidance };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::fixed_mask;
  NoiseSchedule schedule;
  double guidance_weight = 5e-4;  // w_t, constant over the trajectory
  int num_guidance_masks = 4;     // K'
  Restorer restorer;
  RestorerVjp restorer_vjp;        // optional; finite differences otherwise
  bool use_exact_gradient = false;

  void validate() const {
    schedule.validate();
    if (!restorer) throw ConfigError("sampler: restorer not set");
    if (guidance_weight < 0.0) throw ConfigError("sampler: guidance_weight must be >= 0");
    if (kind == SamplerKind::reconstruction_guidance && num_guidance_masks < 1)
      throw ConfigError("sampler: need at least one guidance mask");
  }
};

// One trajectory of the fixed-mask sampler: a single Atilde ~ p(Atilde) held
// for the whole run, update x <- gamma x + (1-gamma) restorer(...).
Eigen::VectorXd fixed_mask_sample(const SamplerConfig& config, const CorruptionProcess& proc,
                                  Rng& rng);

// Fixed-mask update plus the reconstruction-guidance term: minus w_t times
// the x_t-gradient of the mean squared discrepancy between the fixed-mask
// restoration and restorations under K' freshly drawn masks.
Eigen::VectorXd guided_sample(const SamplerConfig& config, const CorruptionProcess& proc,
                              Rng& rng);

// One-step restoration from a (possibly noisy) measurement.
Eigen::VectorXd restore(const Restorer& restorer, const Operator& atilde,
                        const Eigen::VectorXd& y_t, double sigma);

}  // namespace ambient
