#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ambient {

struct GaussHermite {
  Eigen::VectorXd nodes;    // abscissas for weight exp(-x^2/2)/sqrt(2*pi)
  Eigen::VectorXd weights;  // sum to 1
};

// Probabilists' Gauss-Hermite rule: integrates E_{eta~N(0,1)}[f(eta)] exactly
// for polynomials up to degree 2*num_nodes - 1.
GaussHermite gauss_hermite(int num_nodes);

// Tensor-product rule over `dim` independent standard normals. Each entry of
// `points` is one node vector; `weights` are the product weights.
struct TensorGaussHermite {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> weights;
};

TensorGaussHermite tensor_gauss_hermite(int num_nodes, int dim);

}  // namespace ambient
