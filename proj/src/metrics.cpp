#include "ambient/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ambient/errors.hpp"

namespace ambient {

namespace {

// Empirical quantile with linear interpolation on the sorted sample.
double quantile(const std::vector<double>& sorted, double u) {
  const double pos = u * double(sorted.size()) - 0.5;
  if (pos <= 0.0) return sorted.front();
  if (pos >= double(sorted.size() - 1)) return sorted.back();
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - double(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

double w2_1d(std::vector<double>& a, std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t grid = std::max(a.size(), b.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < grid; ++k) {
    const double u = (double(k) + 0.5) / double(grid);
    const double d = quantile(a, u) - quantile(b, u);
    acc += d * d;
  }
  return std::sqrt(acc / double(grid));
}

double nearest_rank(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return quantile(v, q);
}

}  // namespace

double sliced_wasserstein(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          int num_projections, Rng& rng, ExecPolicy policy) {
  if (x.rows() != y.rows()) throw DimensionError("sliced_wasserstein: dimension mismatch");
  if (x.cols() < 100 || y.cols() < 100)
    throw ConfigError("sliced_wasserstein: need at least 100 samples per set");
  if (num_projections < 1) throw ConfigError("sliced_wasserstein: need projections");

  // Directions are drawn up front from the caller's stream so the projection
  // set is independent of the execution policy.
  const int n = static_cast<int>(x.rows());
  Eigen::MatrixXd dirs(n, num_projections);
  for (int j = 0; j < num_projections; ++j) {
    Eigen::VectorXd d(n);
    do {
      for (int i = 0; i < n; ++i) d[i] = rng.gaussian();
    } while (d.norm() == 0.0);
    dirs.col(j) = d / d.norm();
  }

  std::vector<double> partial(kDefaultChunks, 0.0);
  for_each_chunk(policy, static_cast<std::size_t>(num_projections), kDefaultChunks,
                 [&](std::size_t c, std::size_t b, std::size_t e) {
                   for (std::size_t j = b; j < e; ++j) {
                     Eigen::VectorXd px = x.transpose() * dirs.col(static_cast<long>(j));
                     Eigen::VectorXd py = y.transpose() * dirs.col(static_cast<long>(j));
                     std::vector<double> a(px.data(), px.data() + px.size());
                     std::vector<double> bb(py.data(), py.data() + py.size());
                     partial[c] += w2_1d(a, bb);
                   }
                 });
  double total = 0.0;
  for (double v : partial) total += v;
  return total / double(num_projections);
}

double energy_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, ExecPolicy policy) {
  if (x.rows() != y.rows()) throw DimensionError("energy_distance: dimension mismatch");
  const std::size_t nx = static_cast<std::size_t>(x.cols());
  const std::size_t ny = static_cast<std::size_t>(y.cols());
  if (nx < 2 || ny < 2) throw ConfigError("energy_distance: need at least 2 samples per set");

  auto mean_cross = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const std::size_t na = static_cast<std::size_t>(a.cols());
    std::vector<double> partial(kDefaultChunks, 0.0);
    for_each_chunk(policy, na, kDefaultChunks, [&](std::size_t c, std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i)
        partial[c] += (b.colwise() - a.col(static_cast<long>(i))).colwise().norm().sum();
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total / (double(na) * double(b.cols()));
  };
  return 2.0 * mean_cross(x, y) - mean_cross(x, x) - mean_cross(y, y);
}

double psnr(const Eigen::VectorXd& x, const Eigen::VectorXd& ref, double peak) {
  if (x.size() != ref.size()) throw DimensionError("psnr: size mismatch");
  if (peak <= 0.0) throw ConfigError("psnr: peak must be positive");
  const double mse = (x - ref).squaredNorm() / double(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

MemorizationStat memorization_stat(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& train,
                                   ExecPolicy policy) {
  if (generated.rows() != train.rows())
    throw DimensionError("memorization_stat: dimension mismatch");
  if (generated.cols() < 100)
    throw ConfigError("memorization_stat: need at least 100 generated samples");

  const Eigen::VectorXd center = train.rowwise().mean();
  Eigen::MatrixXd g = generated.colwise() - center;
  Eigen::MatrixXd t = train.colwise() - center;

  std::vector<double> train_norms(static_cast<std::size_t>(t.cols()));
  for (long j = 0; j < t.cols(); ++j) train_norms[static_cast<std::size_t>(j)] = t.col(j).norm();

  const std::size_t ng = static_cast<std::size_t>(g.cols());
  std::vector<double> sims(ng, std::numeric_limits<double>::quiet_NaN());
  for_each_chunk(policy, ng, kDefaultChunks, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double gn = g.col(static_cast<long>(i)).norm();
      if (gn == 0.0) continue;  // excluded, counted below
      double best = -1.0;
      for (long j = 0; j < t.cols(); ++j) {
        const double tn = train_norms[static_cast<std::size_t>(j)];
        if (tn == 0.0) continue;
        best = std::max(best, g.col(static_cast<long>(i)).dot(t.col(j)) / (gn * tn));
      }
      sims[i] = best;
    }
  });

  MemorizationStat stat;
  for (double s : sims) {
    if (std::isnan(s))
      ++stat.excluded_zero_norm;
    else
      stat.similarities.push_back(s);
  }
  if (stat.similarities.empty())
    throw NumericalError("memorization_stat: every generated sample had zero norm");
  stat.p50 = nearest_rank(stat.similarities, 0.50);
  stat.p90 = nearest_rank(stat.similarities, 0.90);
  stat.p99 = nearest_rank(stat.similarities, 0.99);
  stat.histogram.assign(MemorizationStat::kNumBins, 0);
  for (double s : stat.similarities) {
    int bin = static_cast<int>((s + 1.0) / 2.0 * MemorizationStat::kNumBins);
    bin = std::clamp(bin, 0, MemorizationStat::kNumBins - 1);
    ++stat.histogram[static_cast<std::size_t>(bin)];
  }
  return stat;
}

void write_histogram_svg(const std::string& path, const MemorizationStat& stat) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open SVG for writing: " + path);
  const int w = 640, h = 360, margin = 40;
  const int nb = MemorizationStat::kNumBins;
  int peak = 1;
  for (int v : stat.histogram) peak = std::max(peak, v);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\">\n";
  f << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  const double bw = double(w - 2 * margin) / nb;
  for (int i = 0; i < nb; ++i) {
    const double bh = double(stat.histogram[static_cast<std::size_t>(i)]) / peak *
                      double(h - 2 * margin);
    f << "<rect x=\"" << margin + i * bw << "\" y=\"" << h - margin - bh << "\" width=\""
      << bw * 0.9 << "\" height=\"" << bh << "\" fill=\"steelblue\"/>\n";
  }
  f << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
    << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
  f << "<text x=\"" << margin << "\" y=\"" << h - margin + 20
    << "\" font-size=\"12\">-1</text>\n";
  f << "<text x=\"" << w - margin - 10 << "\" y=\"" << h - margin + 20
    << "\" font-size=\"12\">1</text>\n";
  f << "<text x=\"" << w / 2 - 80 << "\" y=\"" << margin - 10
    << "\" font-size=\"13\">top-1 cosine similarity to training set</text>\n";
  f << "</svg>\n";
}

void write_report_csv(const std::string& path, const MetricReport& report) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open report for writing: " + path);
  f << "# distributional metrics are desk-scale stand-ins: sliced Wasserstein and energy\n";
  f << "# distance in place of FID/Inception, raw-data cosine similarity in place of DINO\n";
  f << "sliced_wasserstein,energy_distance,psnr_db,nn_p50,nn_p90,nn_p99,n_generated,"
       "n_reference,config_digest\n";
  f << report.sliced_wasserstein << "," << report.energy_distance << "," << report.psnr_db
    << "," << report.nn_p50 << "," << report.nn_p90 << "," << report.nn_p99 << ","
    << report.n_generated << "," << report.n_reference << "," << report.config_digest << "\n";
}

void write_report_json(const std::string& path, const MetricReport& report,
                       const MemorizationStat* stat) {
  nlohmann::json j;
  j["sliced_wasserstein"] = report.sliced_wasserstein;
  j["energy_distance"] = report.energy_distance;
  if (std::isfinite(report.psnr_db)) j["psnr_db"] = report.psnr_db;
  j["n_generated"] = report.n_generated;
  j["n_reference"] = report.n_reference;
  j["config_digest"] = report.config_digest;
  if (stat) {
    j["nn_similarity_quantiles"] = {{"p50", stat->p50}, {"p90", stat->p90}, {"p99", stat->p99}};
    j["histogram"] = stat->histogram;
    j["histogram_range"] = {-1.0, 1.0};
    j["excluded_zero_norm"] = stat->excluded_zero_norm;
  }
  std::ofstream f(path);
  if (!f) throw IoError("cannot open report for writing: " + path);
  f << j.dump(2) << "\n";
}

}  // namespace ambient
