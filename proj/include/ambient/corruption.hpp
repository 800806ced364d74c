#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "ambient/errors.hpp"
#include "ambient/parallel.hpp"
#include "ambient/rng.hpp"

namespace ambient {

// Diagonal 0/1 measurement operator stored as one byte per pixel.
struct Mask {
  std::vector<std::uint8_t> diag;

  int n() const { return static_cast<int>(diag.size()); }
  bool observed(int i) const { return diag[static_cast<std::size_t>(i)] != 0; }
  int num_observed() const;

  static Mask ones(int n) { return Mask{std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1)}; }
  static Mask zeros(int n) { return Mask{std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0)}; }

  std::vector<std::uint8_t> serialize() const;
  static Mask deserialize(const std::uint8_t* data, std::size_t size, std::size_t* consumed);
};

// Dense m x n operator with i.i.d. standard normal rows; dropped rows are
// all-zero and flagged in row_valid.
struct GaussianMeasurement {
  Eigen::MatrixXd rows;               // m x n, zeroed rows stay zero
  std::vector<std::uint8_t> row_valid;  // 1 = nondegenerate row

  int m() const { return static_cast<int>(rows.rows()); }
  int n() const { return static_cast<int>(rows.cols()); }
  int num_valid() const;

  std::vector<std::uint8_t> serialize() const;
  static GaussianMeasurement deserialize(const std::uint8_t* data, std::size_t size,
                                         std::size_t* consumed);
};

using Operator = std::variant<Mask, GaussianMeasurement>;

enum class CorruptionKind { random_inpainting, block_inpainting, gaussian };

// Grid geometry for block inpainting; vectors are row-major h*w*c.
struct ImageShape {
  int h = 1, w = 1, c = 1;
  int size() const { return h * w * c; }
};

struct CorruptionProcess {
  CorruptionKind kind = CorruptionKind::random_inpainting;
  double p = 0.0;       // per-pixel erasure probability (inpainting kinds)
  double delta = 0.1;   // further-corruption probability (inpainting)
  int block_size = 0;   // block side length in pixels (block kind)
  int m = 0;            // measurement rows (gaussian kind)
  int n = 0;            // ambient dimension
  int drop_rows = 1;    // rows zeroed by further corruption (gaussian kind)
  ImageShape shape;     // block kind only

  void validate() const;
};

Operator sample_corruption(const CorruptionProcess& proc, Rng& rng);
Operator further_corrupt(const Operator& a, const CorruptionProcess& proc, Rng& rng);

Eigen::VectorXd apply(const Operator& op, const Eigen::VectorXd& x);
// Transpose action: lifts a residual in measurement space back to R^n.
Eigen::VectorXd apply_transpose(const Operator& op, const Eigen::VectorXd& r);
int measurement_dim(const Operator& op, int n);

// Posterior probability that an Atilde-erased pixel was observed by A.
double inpainting_posterior_q(double p, double delta);

// Closed-form E_{A|Atilde}[A^T A]. Throws ConfigError for the block kind,
// which has no simple closed form; use estimate_second_moment there.
Eigen::MatrixXd conditional_second_moment(const CorruptionProcess& proc, const Operator& atilde);

struct MomentEstimate {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd std_error;
  std::size_t num_samples = 0;
};

MomentEstimate estimate_second_moment(const CorruptionProcess& proc, const Operator& atilde,
                                      std::size_t num_samples, Rng& rng,
                                      ExecPolicy policy = ExecPolicy::serial);

// One draw from p(A | Atilde). Exact per-coordinate sampling for random
// inpainting, row resampling for gaussian, rejection for block.
Operator sample_conditional(const CorruptionProcess& proc, const Operator& atilde, Rng& rng);

}  // namespace ambient
