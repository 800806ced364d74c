#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ambient/corruption.hpp"
#include "ambient/errors.hpp"
#include "ambient/rng.hpp"

namespace ambient {

struct MlpArch {
  int input_dim = 0;
  int output_dim = 0;
  int hidden_width = 256;
  int hidden_layers = 3;

  bool operator==(const MlpArch&) const = default;
};

// Fully connected tanh network with a linear, zero-initialized output head.
// Parameters live in one flat vector; forward caches activations for the
// exact backward pass.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(const MlpArch& arch);

  const MlpArch& arch() const { return arch_; }
  Eigen::VectorXd& theta() { return theta_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  int param_count() const { return static_cast<int>(theta_.size()); }

  void init(Rng& rng);

  struct Workspace {
    Eigen::VectorXd input;
    std::vector<Eigen::VectorXd> act;  // post-tanh hidden activations
    bool valid = false;
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& input, Workspace* ws = nullptr) const;

  // Gradient of a scalar loss w.r.t. theta, given d loss / d output.
  Eigen::VectorXd backward(const Workspace& ws, const Eigen::VectorXd& out_grad) const;
  // Same, accumulated into an existing buffer (for batched training).
  void backward_accumulate(const Workspace& ws, const Eigen::VectorXd& out_grad,
                           Eigen::VectorXd& theta_grad) const;

  // Gradient of a scalar loss w.r.t. the network input.
  Eigen::VectorXd input_backward(const Workspace& ws, const Eigen::VectorXd& out_grad) const;

  // Snap every parameter to its nearest float32 value; keeps checkpoints
  // bit-exact round trips.
  void round_params_to_f32();

  std::vector<std::uint8_t> serialize(const std::string& config_digest) const;
  static Mlp deserialize(const std::vector<std::uint8_t>& bytes, std::string* config_digest);

  void save(const std::string& path, const std::string& config_digest) const;
  static Mlp load(const std::string& path, std::string* config_digest);

 private:
  struct LayerView {
    int w_off, b_off, rows, cols;
  };
  std::vector<LayerView> layers_;  // hidden layers then output head
  MlpArch arch_;
  Eigen::VectorXd theta_;

  void build_views();
};

// Encodes (Atilde, masked observation, sigma) into the network input vector.
// Inpainting kinds: [y (n), mask diag (n), sigma embedding].
// Gaussian kind: [y (m), flattened rows (m*n), row-validity bits (m), sigma embedding].
struct InputCodec {
  CorruptionKind kind = CorruptionKind::random_inpainting;
  int n = 0;
  int m = 0;

  static constexpr int kSigmaEmbedDim = 8;

  int dim() const;
  Eigen::VectorXd encode(const Operator& atilde, const Eigen::VectorXd& y, double sigma) const;
  // Number of leading input entries that hold the measurement y.
  int measurement_offset() const { return 0; }
  int measurement_dim() const { return kind == CorruptionKind::gaussian ? m : n; }
};

Eigen::VectorXd sigma_embedding(double sigma);

}  // namespace ambient
