#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ambient/errors.hpp"
#include "ambient/rng.hpp"

namespace ambient {

// Variance-exploding schedule with geometric interpolation
// sigma(t) = sigma_min * (sigma_max/sigma_min)^t for t in [0,1].
struct NoiseSchedule {
  double sigma_min = 0.01;
  double sigma_max = 5.0;
  int num_steps = 64;

  void validate() const {
    if (sigma_min <= 0.0 || sigma_max <= sigma_min)
      throw ConfigError("schedule: need 0 < sigma_min < sigma_max");
    if (num_steps < 1) throw ConfigError("schedule: num_steps must be >= 1");
  }

  double sigma(double t) const {
    return sigma_min * std::pow(sigma_max / sigma_min, t);
  }

  // t_0 = 1 > t_1 > ... > t_N = 0.
  std::vector<double> grid_times() const {
    std::vector<double> ts(static_cast<std::size_t>(num_steps) + 1);
    for (int i = 0; i <= num_steps; ++i)
      ts[static_cast<std::size_t>(i)] = 1.0 - double(i) / num_steps;
    return ts;
  }

  // Training-time draw: t uniform, i.e. log sigma uniform on its range.
  double sample_time(Rng& rng) const { return rng.uniform(); }
};

struct NoisySample {
  Eigen::VectorXd x_t;
  double t = 0.0;
  double sigma_t = 0.0;
  Eigen::VectorXd eta;  // the exact Gaussian draw, kept for reproducibility
};

NoisySample forward_noise(const Eigen::VectorXd& x0, double t, const NoiseSchedule& sched,
                          Rng& rng);

// Tweedie conversion: score = (E[x0|x_t] - x_t) / sigma_t^2.
Eigen::VectorXd score_from_denoiser(const Eigen::VectorXd& denoised, const Eigen::VectorXd& x_t,
                                    double sigma_t);

}  // namespace ambient
