#include "ambient/population.hpp"

#include <cmath>
#include <numbers>

#include "ambient/quadrature.hpp"

namespace ambient {

namespace {

// Joint per-coordinate probabilities of (A_ii, Atilde_ii).
struct CoordJoint {
  double a1_t1, a1_t0, a0_t0;  // (1,1), (1,0), (0,0); (0,1) is impossible
};

CoordJoint coord_joint(double p, double delta) {
  return {(1.0 - p) * (1.0 - delta), (1.0 - p) * delta, p};
}

double normal_pdf(double x, double mean, double sigma) {
  double z = (x - mean) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi_v<double>));
}

std::vector<int> erased_coords(const Mask& atilde) {
  std::vector<int> out;
  for (int i = 0; i < atilde.n(); ++i)
    if (!atilde.observed(i)) out.push_back(i);
  return out;
}

}  // namespace

Eigen::MatrixXd bayes_second_moment(const Mask& atilde, double p, double delta) {
  const CoordJoint j = coord_joint(p, delta);
  const int n = atilde.n();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (atilde.observed(i)) {
      // Atilde_ii = 1 forces A_ii = 1.
      m(i, i) = 1.0;
    } else {
      double denom = j.a1_t0 + j.a0_t0;
      m(i, i) = denom > 0.0 ? j.a1_t0 / denom : 0.0;
    }
  }
  return m;
}

Eigen::VectorXd population_minimizer(const FiniteDistribution& dist, const Mask& atilde,
                                     const Eigen::VectorXd& y, double sigma, double p,
                                     double delta) {
  dist.validate();
  const int n = atilde.n();
  if (dist.dim() != n || y.size() != n)
    throw DimensionError("population_minimizer: dimension mismatch");
  const CoordJoint joint = coord_joint(p, delta);

  // Data weights conditional on the observed coordinates of y.
  const int num_atoms = dist.num_atoms();
  std::vector<double> omega(static_cast<std::size_t>(num_atoms));
  double omega_total = 0.0;
  for (int a = 0; a < num_atoms; ++a) {
    double w = dist.probs[static_cast<std::size_t>(a)];
    for (int i = 0; i < n; ++i)
      if (atilde.observed(i))
        w *= normal_pdf(y[i], dist.atoms[static_cast<std::size_t>(a)][i], sigma);
    omega[static_cast<std::size_t>(a)] = w;
    omega_total += w;
  }
  if (omega_total <= 0.0)
    throw NumericalError("population_minimizer: query has zero conditional density");

  // Enumerate every A consistent with Atilde: observed coordinates are
  // pinned to 1, each erased coordinate is free.
  const std::vector<int> zeros = erased_coords(atilde);
  if (zeros.size() > 24) throw ConfigError("population_minimizer: too many erased coordinates");
  const double pa1 = joint.a1_t0, pa0 = joint.a0_t0;  // unnormalized per coord
  Eigen::MatrixXd m_acc = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd c_acc = Eigen::VectorXd::Zero(n);
  double mass = 0.0;
  const std::size_t patterns = std::size_t{1} << zeros.size();
  for (std::size_t bits = 0; bits < patterns; ++bits) {
    Mask a = atilde;
    double prob = 1.0;
    for (std::size_t z = 0; z < zeros.size(); ++z) {
      bool on = (bits >> z) & 1;
      a.diag[static_cast<std::size_t>(zeros[z])] = on ? 1 : 0;
      prob *= on ? pa1 : pa0;
    }
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) ata(i, i) = a.observed(i) ? 1.0 : 0.0;
    m_acc += prob * ata;
    for (int at = 0; at < num_atoms; ++at)
      c_acc += prob * (omega[static_cast<std::size_t>(at)] / omega_total) *
               (ata * dist.atoms[static_cast<std::size_t>(at)]);
    mass += prob;
  }
  m_acc /= mass;
  c_acc /= mass;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m_acc);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
    throw NumericalError("population_minimizer: E[A^T A | Atilde] is singular");
  return ldlt.solve(c_acc);
}

namespace {

double objective_common(const FiniteDistribution& dist, double p, double delta, double sigma,
                        const std::function<Eigen::VectorXd(const Mask&, const Eigen::VectorXd&)>& h,
                        int gh_nodes, bool further) {
  dist.validate();
  const int n = dist.dim();
  if (n > 12) throw ConfigError("population_objective: dimension too large to enumerate");
  double total = 0.0;
  const std::size_t a_patterns = std::size_t{1} << n;
  for (std::size_t abits = 0; abits < a_patterns; ++abits) {
    Mask a = Mask::zeros(n);
    double pa = 1.0;
    for (int i = 0; i < n; ++i) {
      bool on = (abits >> i) & 1;
      a.diag[static_cast<std::size_t>(i)] = on ? 1 : 0;
      pa *= on ? (1.0 - p) : p;
    }
    if (pa == 0.0) continue;
    std::vector<int> observed;
    for (int i = 0; i < n; ++i)
      if (a.observed(i)) observed.push_back(i);

    // Enumerate further-corruption patterns over A's support (identity when
    // the naive objective is requested).
    const std::size_t b_patterns = further ? (std::size_t{1} << observed.size()) : 1;
    for (std::size_t bbits = 0; bbits < b_patterns; ++bbits) {
      Mask at = a;
      double pb = 1.0;
      if (further) {
        for (std::size_t z = 0; z < observed.size(); ++z) {
          bool keep = !((bbits >> z) & 1);
          if (!keep) at.diag[static_cast<std::size_t>(observed[z])] = 0;
          pb *= keep ? (1.0 - delta) : delta;
        }
      }
      if (pb == 0.0) continue;

      // Noise matters only on Atilde-observed coordinates.
      std::vector<int> at_obs;
      for (int i = 0; i < n; ++i)
        if (at.observed(i)) at_obs.push_back(i);
      TensorGaussHermite gh = tensor_gauss_hermite(gh_nodes, static_cast<int>(at_obs.size()));

      for (int atom = 0; atom < dist.num_atoms(); ++atom) {
        const Eigen::VectorXd& x0 = dist.atoms[static_cast<std::size_t>(atom)];
        const double px = dist.probs[static_cast<std::size_t>(atom)];
        for (std::size_t gq = 0; gq < gh.points.size(); ++gq) {
          Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
          for (std::size_t z = 0; z < at_obs.size(); ++z)
            y[at_obs[z]] = x0[at_obs[z]] + sigma * gh.points[gq][static_cast<long>(z)];
          Eigen::VectorXd pred = h(at, y);
          double loss = 0.0;
          for (int i : observed) {
            double d = pred[i] - x0[i];
            loss += d * d;
          }
          total += 0.5 * pa * pb * px * gh.weights[gq] * loss;
        }
      }
    }
  }
  return total;
}

}  // namespace

double population_objective(const FiniteDistribution& dist, double p, double delta, double sigma,
                            const std::function<Eigen::VectorXd(const Mask&, const Eigen::VectorXd&)>& h,
                            int gh_nodes) {
  return objective_common(dist, p, delta, sigma, h, gh_nodes, true);
}

double population_objective_naive(const FiniteDistribution& dist, double p, double sigma,
                                  const std::function<Eigen::VectorXd(const Mask&, const Eigen::VectorXd&)>& h,
                                  int gh_nodes) {
  return objective_common(dist, p, 0.0, sigma, h, gh_nodes, false);
}

}  // namespace ambient
