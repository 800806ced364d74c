#include "ambient/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include "ambient/errors.hpp"

namespace ambient {

GaussHermite gauss_hermite(int num_nodes) {
  if (num_nodes < 1) throw ConfigError("gauss_hermite: need at least one node");
  // Golub-Welsch on the Jacobi matrix of the Hermite recurrence with weight
  // exp(-x^2/2): off-diagonal entries sqrt(k).
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
  for (int k = 1; k < num_nodes; ++k) {
    double v = std::sqrt(double(k));
    J(k, k - 1) = v;
    J(k - 1, k) = v;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermite gh;
  gh.nodes = es.eigenvalues();
  gh.weights.resize(num_nodes);
  for (int i = 0; i < num_nodes; ++i) {
    double v0 = es.eigenvectors()(0, i);
    gh.weights[i] = v0 * v0;  // total mass 1 for the normalized weight
  }
  return gh;
}

TensorGaussHermite tensor_gauss_hermite(int num_nodes, int dim) {
  if (dim < 0) throw ConfigError("tensor_gauss_hermite: negative dimension");
  GaussHermite base = gauss_hermite(num_nodes);
  TensorGaussHermite out;
  if (dim == 0) {
    out.points.push_back(Eigen::VectorXd::Zero(0));
    out.weights.push_back(1.0);
    return out;
  }
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  while (true) {
    Eigen::VectorXd pt(dim);
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      pt[d] = base.nodes[idx[static_cast<std::size_t>(d)]];
      w *= base.weights[idx[static_cast<std::size_t>(d)]];
    }
    out.points.push_back(pt);
    out.weights.push_back(w);
    int d = 0;
    while (d < dim) {
      if (++idx[static_cast<std::size_t>(d)] < num_nodes) break;
      idx[static_cast<std::size_t>(d)] = 0;
      ++d;
    }
    if (d == dim) break;
  }
  return out;
}

}  // namespace ambient
