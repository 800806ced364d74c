#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

#include "ambient/corruption.hpp"
#include "ambient/errors.hpp"
#include "ambient/rng.hpp"

namespace ambient {

struct GmmDistribution {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;

  int num_components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
  Eigen::VectorXd prior_mean() const;
  void validate() const;
};

struct FiniteDistribution {
  std::vector<Eigen::VectorXd> atoms;
  std::vector<double> probs;

  int num_atoms() const { return static_cast<int>(atoms.size()); }
  int dim() const { return atoms.empty() ? 0 : static_cast<int>(atoms[0].size()); }
  Eigen::VectorXd prior_mean() const;
  void validate() const;
};

using DataDistribution = std::variant<GmmDistribution, FiniteDistribution>;

// Rows of the operator restricted to its nondegenerate part: observed
// coordinates for masks, valid rows for gaussian measurements. k x n; k may
// be zero when nothing is observed.
Eigen::MatrixXd reduced_operator(const Operator& op, int n);

// E[x0 | Atilde x_t = y, Atilde] for x_t = x0 + sigma * eta. All-zero rows of
// Atilde are dropped before inference; with nothing observed the prior mean
// is returned. Responsibilities are computed in the log domain.
Eigen::VectorXd gmm_posterior_mean(const GmmDistribution& dist, const Operator& atilde,
                                   const Eigen::VectorXd& y, double sigma);

Eigen::VectorXd finite_posterior_mean(const FiniteDistribution& dist, const Operator& atilde,
                                      const Eigen::VectorXd& y, double sigma);

Eigen::VectorXd posterior_mean(const DataDistribution& dist, const Operator& atilde,
                               const Eigen::VectorXd& y, double sigma);

// Analytic grad log p_t(x_t) for the sigma-smoothed mixture.
Eigen::VectorXd gmm_marginal_score(const GmmDistribution& dist, const Eigen::VectorXd& x_t,
                                   double sigma);
double gmm_marginal_logpdf(const GmmDistribution& dist, const Eigen::VectorXd& x_t, double sigma);

Eigen::VectorXd sample(const GmmDistribution& dist, Rng& rng);
Eigen::VectorXd sample(const FiniteDistribution& dist, Rng& rng);
Eigen::VectorXd sample(const DataDistribution& dist, Rng& rng);
int data_dim(const DataDistribution& dist);

// K=3, equal weights, means at the vertices of an equilateral triangle of
// circumradius 1 centered at the origin (first vertex at angle_deg),
// covariances 0.1^2 I. The benchmark distribution every tuned number in the
// test suites is computed against.
GmmDistribution canonical_gmm(double angle_deg = 15.0);

// Rigid embedding of a GMM into a higher ambient dimension via a seeded
// orthonormal map; isotropic covariances keep their scale.
GmmDistribution embed_gmm(const GmmDistribution& dist, int ambient_dim, std::uint64_t seed);

}  // namespace ambient
