#include "ambient/sampler.hpp"

#include <cmath>
#include <string>

namespace ambient {

namespace {

Eigen::VectorXd call_restorer(const Restorer& r, const Operator& atilde,
                              const Eigen::VectorXd& y, double sigma, int step) {
  Eigen::VectorXd out = r(atilde, y, sigma);
  if (!out.allFinite())
    throw NumericalError("sampler: restorer returned non-finite output at step " +
                         std::to_string(step));
  return out;
}

double mean_discrepancy(const SamplerConfig& cfg, const Operator& atilde,
                        const std::vector<Operator>& aux, const Eigen::VectorXd& x,
                        double sigma, int step) {
  Eigen::VectorXd base = call_restorer(cfg.restorer, atilde, ambient::apply(atilde, x), sigma, step);
  double acc = 0.0;
  for (const Operator& ap : aux) {
    Eigen::VectorXd other = call_restorer(cfg.restorer, ap, ambient::apply(ap, x), sigma, step);
    acc += (base - other).squaredNorm();
  }
  return acc / double(aux.size());
}

Eigen::VectorXd guidance_gradient(const SamplerConfig& cfg, const Operator& atilde,
                                  const std::vector<Operator>& aux, const Eigen::VectorXd& x,
                                  double sigma, int step) {
  const int n = static_cast<int>(x.size());
  if (cfg.use_exact_gradient) {
    if (!cfg.restorer_vjp) throw UsageError("sampler: exact gradient requested without a vjp");
    Eigen::VectorXd base = call_restorer(cfg.restorer, atilde, ambient::apply(atilde, x), sigma, step);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
    for (const Operator& ap : aux) {
      Eigen::VectorXd other = call_restorer(cfg.restorer, ap, ambient::apply(ap, x), sigma, step);
      Eigen::VectorXd d = base - other;  // cotangent of the squared norm, halved
      grad += cfg.restorer_vjp(atilde, x, sigma, d) - cfg.restorer_vjp(ap, x, sigma, d);
    }
    return grad * (2.0 / double(aux.size()));
  }
  // Central finite differences of the scalar discrepancy, step 1e-3 * sigma.
  const double h = 1e-3 * sigma;
  Eigen::VectorXd grad(n);
  Eigen::VectorXd probe = x;
  for (int i = 0; i < n; ++i) {
    probe[i] = x[i] + h;
    double dp = mean_discrepancy(cfg, atilde, aux, probe, sigma, step);
    probe[i] = x[i] - h;
    double dm = mean_discrepancy(cfg, atilde, aux, probe, sigma, step);
    probe[i] = x[i];
    grad[i] = (dp - dm) / (2.0 * h);
  }
  return grad;
}

Eigen::VectorXd run_trajectory(const SamplerConfig& cfg, const CorruptionProcess& proc,
                               Rng& rng, bool guided) {
  cfg.validate();
  proc.validate();
  const int n = proc.n;
  const std::uint64_t base_seed = rng.next_u64();
  Rng mask_rng = Rng::derive(base_seed, 0);
  Rng traj_rng = Rng::derive(base_seed, 1);

  Operator a = sample_corruption(proc, mask_rng);
  Operator atilde = further_corrupt(a, proc, mask_rng);

  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = cfg.schedule.sigma_max * traj_rng.gaussian();

  const std::vector<double> times = cfg.schedule.grid_times();
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double sigma_t = cfg.schedule.sigma(times[i]);
    const double sigma_next = cfg.schedule.sigma(times[i + 1]);
    const double gamma = sigma_next / sigma_t;
    if (!(gamma >= 0.0 && gamma <= 1.0))
      throw NumericalError("sampler: gamma outside [0,1] at step " + std::to_string(i));
    Eigen::VectorXd x0_hat =
        call_restorer(cfg.restorer, atilde, ambient::apply(atilde, x), sigma_t, static_cast<int>(i));
    Eigen::VectorXd next = gamma * x + (1.0 - gamma) * x0_hat;
    if (guided) {
      Rng aux_rng = Rng::derive(base_seed, 2 + i);
      std::vector<Operator> aux;
      aux.reserve(static_cast<std::size_t>(cfg.num_guidance_masks));
      for (int k = 0; k < cfg.num_guidance_masks; ++k) {
        Operator ap = sample_corruption(proc, aux_rng);
        aux.push_back(further_corrupt(ap, proc, aux_rng));
      }
      if (cfg.guidance_weight > 0.0)
        next -= cfg.guidance_weight *
                guidance_gradient(cfg, atilde, aux, x, sigma_t, static_cast<int>(i));
    }
    x = next;
  }
  return x;
}

}  // namespace

Eigen::VectorXd fixed_mask_sample(const SamplerConfig& config, const CorruptionProcess& proc,
                                  Rng& rng) {
  return run_trajectory(config, proc, rng, false);
}

Eigen::VectorXd guided_sample(const SamplerConfig& config, const CorruptionProcess& proc,
                              Rng& rng) {
  return run_trajectory(config, proc, rng, true);
}

Eigen::VectorXd restore(const Restorer& restorer, const Operator& atilde,
                        const Eigen::VectorXd& y_t, double sigma) {
  return restorer(atilde, y_t, sigma);
}

}  // namespace ambient
