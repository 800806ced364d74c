#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ambient/parallel.hpp"
#include "ambient/rng.hpp"

namespace ambient {

// Samples are columns: X is n x N.

// Average over random unit directions of the 1-D 2-Wasserstein distance
// between the projected empirical distributions. With a fixed projection
// seed the result is exactly symmetric in (X, Y).
double sliced_wasserstein(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          int num_projections, Rng& rng,
                          ExecPolicy policy = ExecPolicy::serial);

double energy_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                       ExecPolicy policy = ExecPolicy::serial);

// 10 log10(peak^2 / MSE); +infinity for identical inputs.
double psnr(const Eigen::VectorXd& x, const Eigen::VectorXd& ref, double peak);

struct MemorizationStat {
  double p50 = 0.0, p90 = 0.0, p99 = 0.0;
  std::vector<int> histogram;  // fixed bins over [-1, 1]
  std::size_t excluded_zero_norm = 0;
  std::vector<double> similarities;

  static constexpr int kNumBins = 100;
};

// Per generated sample, the maximum cosine similarity (train-mean-centered
// data space) to any training point.
MemorizationStat memorization_stat(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& train,
                                   ExecPolicy policy = ExecPolicy::serial);

void write_histogram_svg(const std::string& path, const MemorizationStat& stat);

struct MetricReport {
  double sliced_wasserstein = 0.0;
  double energy_distance = 0.0;
  double psnr_db = std::numeric_limits<double>::quiet_NaN();
  double nn_p50 = std::numeric_limits<double>::quiet_NaN();
  double nn_p90 = std::numeric_limits<double>::quiet_NaN();
  double nn_p99 = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_generated = 0;
  std::size_t n_reference = 0;
  std::string config_digest;
};

void write_report_csv(const std::string& path, const MetricReport& report);
void write_report_json(const std::string& path, const MetricReport& report,
                       const MemorizationStat* stat = nullptr);

}  // namespace ambient
