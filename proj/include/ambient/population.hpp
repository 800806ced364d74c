#pragma once

#include <Eigen/Dense>
#include <functional>

#include "ambient/corruption.hpp"
#include "ambient/oracle.hpp"

namespace ambient {

// E_{A|Atilde}[A^T A] for random inpainting, assembled by enumerating the
// four per-coordinate (A_ii, Atilde_ii) Bernoulli outcomes directly. Kept
// deliberately separate from conditional_second_moment's closed form so the
// two can check each other.
Eigen::MatrixXd bayes_second_moment(const Mask& atilde, double p, double delta);

// The population minimizer of the further-corruption objective at a query
// (Atilde, y = Atilde x_t, sigma), for finite-support data under random
// inpainting. Solves M h = E[A^T A x0 | Atilde, y] where both sides are
// built by enumerating all corruption masks A consistent with Atilde; never
// calls the posterior-mean oracle.
Eigen::VectorXd population_minimizer(const FiniteDistribution& dist, const Mask& atilde,
                                     const Eigen::VectorXd& y, double sigma, double p,
                                     double delta);

// Population value of the further-corruption objective for an arbitrary
// restoration function, by full enumeration over (atom, A, Atilde) and
// tensor Gauss-Hermite quadrature over the noise. Used to certify that a
// candidate function is a minimizer.
double population_objective(const FiniteDistribution& dist, double p, double delta, double sigma,
                            const std::function<Eigen::VectorXd(const Mask&, const Eigen::VectorXd&)>& h,
                            int gh_nodes = 8);

// Same enumeration for the naive objective (model input mask equals the loss
// mask, no further corruption).
double population_objective_naive(const FiniteDistribution& dist, double p, double sigma,
                                  const std::function<Eigen::VectorXd(const Mask&, const Eigen::VectorXd&)>& h,
                                  int gh_nodes = 8);

}  // namespace ambient
