#include "ambient/schedule.hpp"

namespace ambient {

NoisySample forward_noise(const Eigen::VectorXd& x0, double t, const NoiseSchedule& sched,
                          Rng& rng) {
  sched.validate();
  if (t < 0.0 || t > 1.0) throw ConfigError("forward_noise: t must be in [0,1]");
  NoisySample out;
  out.t = t;
  out.sigma_t = sched.sigma(t);
  out.eta.resize(x0.size());
  for (int i = 0; i < x0.size(); ++i) out.eta[i] = rng.gaussian();
  out.x_t = x0 + out.sigma_t * out.eta;
  return out;
}

Eigen::VectorXd score_from_denoiser(const Eigen::VectorXd& denoised, const Eigen::VectorXd& x_t,
                                    double sigma_t) {
  if (denoised.size() != x_t.size())
    throw DimensionError("score_from_denoiser: size mismatch");
  if (sigma_t <= 0.0) throw NumericalError("score_from_denoiser: sigma_t must be positive");
  return (denoised - x_t) / (sigma_t * sigma_t);
}

}  // namespace ambient
