#include "ambient/oracle.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

namespace ambient {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Symmetric factorization with one jitter retry (1e-9 * trace / k on the
// diagonal), the documented regularizer for masked Gram matrices of
// near-degenerate mixtures.
Eigen::LDLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& c) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
  auto healthy = [](const Eigen::LDLT<Eigen::MatrixXd>& f) {
    return f.info() == Eigen::Success && (f.vectorD().array() > 0.0).all();
  };
  if (healthy(ldlt)) return ldlt;
  const double jitter = 1e-9 * c.trace() / double(c.rows());
  Eigen::MatrixXd cj = c + jitter * Eigen::MatrixXd::Identity(c.rows(), c.cols());
  ldlt.compute(cj);
  if (!healthy(ldlt))
    throw NumericalError("oracle: reduced covariance singular beyond jitter tolerance");
  return ldlt;
}

double log_det(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
  return ldlt.vectorD().array().log().sum();
}

Eigen::VectorXd normalize_log_weights(std::vector<double>& logw) {
  double mx = logw[0];
  for (double v : logw) mx = std::max(mx, v);
  double total = 0.0;
  Eigen::VectorXd w(static_cast<long>(logw.size()));
  for (std::size_t i = 0; i < logw.size(); ++i) {
    w[static_cast<long>(i)] = std::exp(logw[i] - mx);
    total += w[static_cast<long>(i)];
  }
  return w / total;
}

}  // namespace

Eigen::VectorXd GmmDistribution::prior_mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
  for (int k = 0; k < num_components(); ++k) m += weights[static_cast<std::size_t>(k)] * means[static_cast<std::size_t>(k)];
  return m;
}

void GmmDistribution::validate() const {
  if (weights.empty() || weights.size() != means.size() || weights.size() != covs.size())
    throw ConfigError("gmm: inconsistent component counts");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("gmm: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("gmm: weights must sum to 1");
  for (std::size_t k = 0; k < covs.size(); ++k) {
    if (means[k].size() != means[0].size() || covs[k].rows() != means[0].size() ||
        covs[k].cols() != means[0].size())
      throw ConfigError("gmm: dimension mismatch");
    if (!covs[k].isApprox(covs[k].transpose(), 1e-10))
      throw ConfigError("gmm: covariance not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(covs[k]);
    if (llt.info() != Eigen::Success)
      throw ConfigError("gmm: covariance admits no symmetric factorization");
  }
}

Eigen::VectorXd FiniteDistribution::prior_mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
  for (int j = 0; j < num_atoms(); ++j) m += probs[static_cast<std::size_t>(j)] * atoms[static_cast<std::size_t>(j)];
  return m;
}

void FiniteDistribution::validate() const {
  if (atoms.empty() || atoms.size() != probs.size())
    throw ConfigError("finite distribution: inconsistent sizes");
  double total = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw ConfigError("finite distribution: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ConfigError("finite distribution: probabilities must sum to 1");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].size() != atoms[0].size())
      throw ConfigError("finite distribution: dimension mismatch");
    for (std::size_t j = i + 1; j < atoms.size(); ++j)
      if (atoms[i] == atoms[j]) throw ConfigError("finite distribution: duplicate atoms");
  }
}

Eigen::MatrixXd reduced_operator(const Operator& op, int n) {
  if (const Mask* mask = std::get_if<Mask>(&op)) {
    if (mask->n() != n) throw DimensionError("reduced_operator: mask size mismatch");
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(mask->num_observed(), n);
    int r = 0;
    for (int i = 0; i < n; ++i)
      if (mask->observed(i)) s(r++, i) = 1.0;
    return s;
  }
  const auto& g = std::get<GaussianMeasurement>(op);
  if (g.n() != n) throw DimensionError("reduced_operator: measurement size mismatch");
  Eigen::MatrixXd s(g.num_valid(), n);
  int r = 0;
  for (int i = 0; i < g.m(); ++i)
    if (g.row_valid[static_cast<std::size_t>(i)]) s.row(r++) = g.rows.row(i);
  return s;
}

// Reduces a measurement-space vector to the rows kept by reduced_operator.
static Eigen::VectorXd reduce_measurement(const Operator& op, const Eigen::VectorXd& y, int n) {
  if (const Mask* mask = std::get_if<Mask>(&op)) {
    if (y.size() != n) throw DimensionError("oracle: measurement size mismatch");
    Eigen::VectorXd out(mask->num_observed());
    int r = 0;
    for (int i = 0; i < n; ++i)
      if (mask->observed(i)) out[r++] = y[i];
    return out;
  }
  const auto& g = std::get<GaussianMeasurement>(op);
  if (y.size() != g.m()) throw DimensionError("oracle: measurement size mismatch");
  Eigen::VectorXd out(g.num_valid());
  int r = 0;
  for (int i = 0; i < g.m(); ++i)
    if (g.row_valid[static_cast<std::size_t>(i)]) out[r++] = y[i];
  return out;
}

Eigen::VectorXd gmm_posterior_mean(const GmmDistribution& dist, const Operator& atilde,
                                   const Eigen::VectorXd& y, double sigma) {
  const int n = dist.dim();
  Eigen::MatrixXd s = reduced_operator(atilde, n);
  if (s.rows() == 0) return dist.prior_mean();
  Eigen::VectorXd ys = reduce_measurement(atilde, y, n);
  const Eigen::MatrixXd sst = s * s.transpose();
  const int kK = dist.num_components();
  std::vector<double> logw(static_cast<std::size_t>(kK));
  std::vector<Eigen::VectorXd> cond_mean(static_cast<std::size_t>(kK));
  for (int k = 0; k < kK; ++k) {
    const Eigen::VectorXd& mu = dist.means[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd& cov = dist.covs[static_cast<std::size_t>(k)];
    Eigen::MatrixXd c = s * cov * s.transpose() + sigma * sigma * sst;
    auto ldlt = factor_spd(c);
    Eigen::VectorXd resid = ys - s * mu;
    Eigen::VectorXd solved = ldlt.solve(resid);
    logw[static_cast<std::size_t>(k)] = std::log(dist.weights[static_cast<std::size_t>(k)]) -
                                        0.5 * (log_det(ldlt) + resid.dot(solved) +
                                               double(s.rows()) * kLog2Pi);
    cond_mean[static_cast<std::size_t>(k)] = mu + cov * s.transpose() * solved;
  }
  Eigen::VectorXd resp = normalize_log_weights(logw);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < kK; ++k) out += resp[k] * cond_mean[static_cast<std::size_t>(k)];
  return out;
}

Eigen::VectorXd finite_posterior_mean(const FiniteDistribution& dist, const Operator& atilde,
                                      const Eigen::VectorXd& y, double sigma) {
  const int n = dist.dim();
  Eigen::MatrixXd s = reduced_operator(atilde, n);
  if (s.rows() == 0) return dist.prior_mean();
  Eigen::VectorXd ys = reduce_measurement(atilde, y, n);
  Eigen::MatrixXd c = sigma * sigma * (s * s.transpose());
  auto ldlt = factor_spd(c);
  const double ld = log_det(ldlt);
  const int kJ = dist.num_atoms();
  std::vector<double> logw(static_cast<std::size_t>(kJ));
  for (int j = 0; j < kJ; ++j) {
    Eigen::VectorXd resid = ys - s * dist.atoms[static_cast<std::size_t>(j)];
    logw[static_cast<std::size_t>(j)] =
        std::log(dist.probs[static_cast<std::size_t>(j)]) -
        0.5 * (ld + resid.dot(ldlt.solve(resid)) + double(s.rows()) * kLog2Pi);
  }
  Eigen::VectorXd resp = normalize_log_weights(logw);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < kJ; ++j) out += resp[j] * dist.atoms[static_cast<std::size_t>(j)];
  return out;
}

Eigen::VectorXd posterior_mean(const DataDistribution& dist, const Operator& atilde,
                               const Eigen::VectorXd& y, double sigma) {
  if (const auto* gmm = std::get_if<GmmDistribution>(&dist))
    return gmm_posterior_mean(*gmm, atilde, y, sigma);
  return finite_posterior_mean(std::get<FiniteDistribution>(dist), atilde, y, sigma);
}

double gmm_marginal_logpdf(const GmmDistribution& dist, const Eigen::VectorXd& x_t,
                           double sigma) {
  const int n = dist.dim();
  std::vector<double> logw(static_cast<std::size_t>(dist.num_components()));
  for (int k = 0; k < dist.num_components(); ++k) {
    Eigen::MatrixXd c = dist.covs[static_cast<std::size_t>(k)] +
                        sigma * sigma * Eigen::MatrixXd::Identity(n, n);
    auto ldlt = factor_spd(c);
    Eigen::VectorXd resid = x_t - dist.means[static_cast<std::size_t>(k)];
    logw[static_cast<std::size_t>(k)] =
        std::log(dist.weights[static_cast<std::size_t>(k)]) -
        0.5 * (log_det(ldlt) + resid.dot(ldlt.solve(resid)) + double(n) * kLog2Pi);
  }
  double mx = *std::max_element(logw.begin(), logw.end());
  double acc = 0.0;
  for (double v : logw) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

Eigen::VectorXd gmm_marginal_score(const GmmDistribution& dist, const Eigen::VectorXd& x_t,
                                   double sigma) {
  const int n = dist.dim();
  std::vector<double> logw(static_cast<std::size_t>(dist.num_components()));
  std::vector<Eigen::VectorXd> comp_score(static_cast<std::size_t>(dist.num_components()));
  for (int k = 0; k < dist.num_components(); ++k) {
    Eigen::MatrixXd c = dist.covs[static_cast<std::size_t>(k)] +
                        sigma * sigma * Eigen::MatrixXd::Identity(n, n);
    auto ldlt = factor_spd(c);
    Eigen::VectorXd resid = x_t - dist.means[static_cast<std::size_t>(k)];
    Eigen::VectorXd solved = ldlt.solve(resid);
    logw[static_cast<std::size_t>(k)] =
        std::log(dist.weights[static_cast<std::size_t>(k)]) -
        0.5 * (log_det(ldlt) + resid.dot(solved) + double(n) * kLog2Pi);
    comp_score[static_cast<std::size_t>(k)] = -solved;
  }
  Eigen::VectorXd resp = normalize_log_weights(logw);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < dist.num_components(); ++k)
    out += resp[k] * comp_score[static_cast<std::size_t>(k)];
  return out;
}

Eigen::VectorXd sample(const GmmDistribution& dist, Rng& rng) {
  double u = rng.uniform();
  int k = 0;
  double acc = 0.0;
  for (; k < dist.num_components() - 1; ++k) {
    acc += dist.weights[static_cast<std::size_t>(k)];
    if (u < acc) break;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(dist.covs[static_cast<std::size_t>(k)]);
  Eigen::VectorXd z(dist.dim());
  for (int i = 0; i < dist.dim(); ++i) z[i] = rng.gaussian();
  return dist.means[static_cast<std::size_t>(k)] + llt.matrixL() * z;
}

Eigen::VectorXd sample(const FiniteDistribution& dist, Rng& rng) {
  double u = rng.uniform();
  int j = 0;
  double acc = 0.0;
  for (; j < dist.num_atoms() - 1; ++j) {
    acc += dist.probs[static_cast<std::size_t>(j)];
    if (u < acc) break;
  }
  return dist.atoms[static_cast<std::size_t>(j)];
}

Eigen::VectorXd sample(const DataDistribution& dist, Rng& rng) {
  if (const auto* gmm = std::get_if<GmmDistribution>(&dist)) return sample(*gmm, rng);
  return sample(std::get<FiniteDistribution>(dist), rng);
}

int data_dim(const DataDistribution& dist) {
  if (const auto* gmm = std::get_if<GmmDistribution>(&dist)) return gmm->dim();
  return std::get<FiniteDistribution>(dist).dim();
}

GmmDistribution canonical_gmm(double angle_deg) {
  GmmDistribution g;
  for (int k = 0; k < 3; ++k) {
    double ang = (angle_deg + 120.0 * k) * std::numbers::pi / 180.0;
    g.weights.push_back(1.0 / 3.0);
    g.means.push_back(Eigen::Vector2d(std::cos(ang), std::sin(ang)));
    g.covs.push_back(0.01 * Eigen::Matrix2d::Identity());
  }
  return g;
}

GmmDistribution embed_gmm(const GmmDistribution& dist, int ambient_dim, std::uint64_t seed) {
  const int d = dist.dim();
  if (ambient_dim < d) throw ConfigError("embed_gmm: ambient dimension too small");
  Rng rng(seed);
  Eigen::MatrixXd raw(ambient_dim, d);
  for (int i = 0; i < ambient_dim; ++i)
    for (int j = 0; j < d; ++j) raw(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(ambient_dim, d);
  GmmDistribution out;
  out.weights = dist.weights;
  for (int k = 0; k < dist.num_components(); ++k) {
    out.means.push_back(q * dist.means[static_cast<std::size_t>(k)]);
    // isotropic scale lifted to the full ambient dimension
    double scale = dist.covs[static_cast<std::size_t>(k)](0, 0);
    out.covs.push_back(scale * Eigen::MatrixXd::Identity(ambient_dim, ambient_dim));
  }
  return out;
}

}  // namespace ambient
