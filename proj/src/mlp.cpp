#include "ambient/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ambient {

namespace {

constexpr char kMagic[4] = {'A', 'M', 'B', 'C'};
constexpr std::uint16_t kVersion = 1;

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put_raw(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get_raw(const std::vector<std::uint8_t>& in, std::size_t& off) {
  if (off + sizeof(T) > in.size()) throw IoError("corrupt checkpoint: truncated");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

Mlp::Mlp(const MlpArch& arch) : arch_(arch) {
  if (arch.input_dim < 1 || arch.output_dim < 1 || arch.hidden_width < 1 ||
      arch.hidden_layers < 1)
    throw ConfigError("mlp: invalid architecture");
  build_views();
  const LayerView& head = layers_.back();
  theta_ = Eigen::VectorXd::Zero(head.b_off + head.rows);
}

void Mlp::build_views() {
  layers_.clear();
  int off = 0;
  int in = arch_.input_dim;
  for (int l = 0; l < arch_.hidden_layers; ++l) {
    LayerView v{off, 0, arch_.hidden_width, in};
    v.b_off = v.w_off + v.rows * v.cols;
    off = v.b_off + v.rows;
    layers_.push_back(v);
    in = arch_.hidden_width;
  }
  LayerView head{off, 0, arch_.output_dim, in};
  head.b_off = head.w_off + head.rows * head.cols;
  layers_.push_back(head);
}

void Mlp::init(Rng& rng) {
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const LayerView& v = layers_[l];
    double scale = 1.0 / std::sqrt(double(v.cols));
    for (int i = 0; i < v.rows * v.cols; ++i) theta_[v.w_off + i] = scale * rng.gaussian();
    for (int i = 0; i < v.rows; ++i) theta_[v.b_off + i] = 0.0;
  }
  // Zero output head: the freshly initialized model predicts the zero vector.
  const LayerView& head = layers_.back();
  theta_.segment(head.w_off, head.rows * head.cols + head.rows).setZero();
  round_params_to_f32();
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input, Workspace* ws) const {
  if (input.size() != arch_.input_dim) throw DimensionError("mlp forward: input size mismatch");
  if (!input.allFinite()) throw NumericalError("mlp forward: non-finite input");
  Eigen::VectorXd h = input;
  if (ws) {
    ws->input = input;
    ws->act.assign(static_cast<std::size_t>(arch_.hidden_layers), Eigen::VectorXd());
    ws->valid = true;
  }
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const LayerView& v = layers_[l];
    Eigen::Map<const Eigen::MatrixXd> W(theta_.data() + v.w_off, v.rows, v.cols);
    Eigen::Map<const Eigen::VectorXd> b(theta_.data() + v.b_off, v.rows);
    h = ((W * h + b).array().tanh()).matrix();
    if (ws) ws->act[l] = h;
  }
  const LayerView& head = layers_.back();
  Eigen::Map<const Eigen::MatrixXd> W(theta_.data() + head.w_off, head.rows, head.cols);
  Eigen::Map<const Eigen::VectorXd> b(theta_.data() + head.b_off, head.rows);
  return W * h + b;
}

void Mlp::backward_accumulate(const Workspace& ws, const Eigen::VectorXd& out_grad,
                              Eigen::VectorXd& theta_grad) const {
  if (!ws.valid) throw UsageError("mlp backward: forward must be evaluated with a workspace");
  if (out_grad.size() != arch_.output_dim)
    throw DimensionError("mlp backward: out_grad size mismatch");
  if (theta_grad.size() != theta_.size())
    throw DimensionError("mlp backward: grad buffer size mismatch");

  const LayerView& head = layers_.back();
  Eigen::Map<const Eigen::MatrixXd> Wh(theta_.data() + head.w_off, head.rows, head.cols);
  const Eigen::VectorXd& last_act = ws.act.back();
  Eigen::Map<Eigen::MatrixXd>(theta_grad.data() + head.w_off, head.rows, head.cols) +=
      out_grad * last_act.transpose();
  Eigen::Map<Eigen::VectorXd>(theta_grad.data() + head.b_off, head.rows) += out_grad;

  Eigen::VectorXd delta = Wh.transpose() * out_grad;
  for (int l = arch_.hidden_layers - 1; l >= 0; --l) {
    const LayerView& v = layers_[static_cast<std::size_t>(l)];
    const Eigen::VectorXd& a = ws.act[static_cast<std::size_t>(l)];
    // tanh' = 1 - a^2
    delta.array() *= (1.0 - a.array().square());
    const Eigen::VectorXd& prev = (l == 0) ? ws.input : ws.act[static_cast<std::size_t>(l - 1)];
    Eigen::Map<Eigen::MatrixXd>(theta_grad.data() + v.w_off, v.rows, v.cols) +=
        delta * prev.transpose();
    Eigen::Map<Eigen::VectorXd>(theta_grad.data() + v.b_off, v.rows) += delta;
    if (l > 0) {
      Eigen::Map<const Eigen::MatrixXd> W(theta_.data() + v.w_off, v.rows, v.cols);
      delta = W.transpose() * delta;
    }
  }
}

Eigen::VectorXd Mlp::backward(const Workspace& ws, const Eigen::VectorXd& out_grad) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta_.size());
  backward_accumulate(ws, out_grad, grad);
  return grad;
}

Eigen::VectorXd Mlp::input_backward(const Workspace& ws, const Eigen::VectorXd& out_grad) const {
  if (!ws.valid) throw UsageError("mlp input_backward: missing workspace");
  const LayerView& head = layers_.back();
  Eigen::Map<const Eigen::MatrixXd> Wh(theta_.data() + head.w_off, head.rows, head.cols);
  Eigen::VectorXd delta = Wh.transpose() * out_grad;
  for (int l = arch_.hidden_layers - 1; l >= 0; --l) {
    const LayerView& v = layers_[static_cast<std::size_t>(l)];
    const Eigen::VectorXd& a = ws.act[static_cast<std::size_t>(l)];
    delta.array() *= (1.0 - a.array().square());
    Eigen::Map<const Eigen::MatrixXd> W(theta_.data() + v.w_off, v.rows, v.cols);
    delta = W.transpose() * delta;
  }
  return delta;
}

void Mlp::round_params_to_f32() {
  for (int i = 0; i < theta_.size(); ++i)
    theta_[i] = static_cast<double>(static_cast<float>(theta_[i]));
}

std::vector<std::uint8_t> Mlp::serialize(const std::string& config_digest) const {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_raw(out, kVersion);
  put_raw(out, static_cast<std::uint32_t>(arch_.input_dim));
  put_raw(out, static_cast<std::uint32_t>(arch_.output_dim));
  put_raw(out, static_cast<std::uint32_t>(arch_.hidden_width));
  put_raw(out, static_cast<std::uint32_t>(arch_.hidden_layers));
  put_raw(out, static_cast<std::uint32_t>(config_digest.size()));
  out.insert(out.end(), config_digest.begin(), config_digest.end());
  put_raw(out, static_cast<std::uint64_t>(theta_.size()));
  for (int i = 0; i < theta_.size(); ++i) put_raw(out, static_cast<float>(theta_[i]));
  put_raw(out, fnv1a(out.data(), out.size()));
  return out;
}

Mlp Mlp::deserialize(const std::vector<std::uint8_t>& bytes, std::string* config_digest) {
  if (bytes.size() < 4 + sizeof(std::uint16_t) + sizeof(std::uint64_t))
    throw IoError("corrupt checkpoint: file too small");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("corrupt checkpoint: bad magic");
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - sizeof(stored), sizeof(stored));
  if (fnv1a(bytes.data(), bytes.size() - sizeof(stored)) != stored)
    throw IoError("corrupt checkpoint: checksum mismatch");
  std::size_t off = 4;
  if (get_raw<std::uint16_t>(bytes, off) != kVersion)
    throw IoError("corrupt checkpoint: unsupported version");
  MlpArch arch;
  arch.input_dim = static_cast<int>(get_raw<std::uint32_t>(bytes, off));
  arch.output_dim = static_cast<int>(get_raw<std::uint32_t>(bytes, off));
  arch.hidden_width = static_cast<int>(get_raw<std::uint32_t>(bytes, off));
  arch.hidden_layers = static_cast<int>(get_raw<std::uint32_t>(bytes, off));
  std::uint32_t dlen = get_raw<std::uint32_t>(bytes, off);
  if (off + dlen > bytes.size()) throw IoError("corrupt checkpoint: truncated digest");
  std::string digest(bytes.begin() + static_cast<long>(off),
                     bytes.begin() + static_cast<long>(off + dlen));
  off += dlen;
  std::uint64_t count = get_raw<std::uint64_t>(bytes, off);
  Mlp model(arch);
  if (count != static_cast<std::uint64_t>(model.param_count()))
    throw IoError("corrupt checkpoint: parameter count does not match architecture");
  for (std::uint64_t i = 0; i < count; ++i)
    model.theta_[static_cast<long>(i)] = static_cast<double>(get_raw<float>(bytes, off));
  if (config_digest) *config_digest = digest;
  return model;
}

void Mlp::save(const std::string& path, const std::string& config_digest) const {
  auto bytes = serialize(config_digest);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
}

Mlp Mlp::load(const std::string& path, std::string* config_digest) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes, config_digest);
}

Eigen::VectorXd sigma_embedding(double sigma) {
  if (!(sigma > 0.0)) throw NumericalError("sigma embedding: sigma must be positive");
  const double u = std::log(sigma);
  Eigen::VectorXd e(InputCodec::kSigmaEmbedDim);
  const double freqs[4] = {0.5, 1.0, 2.0, 4.0};
  for (int k = 0; k < 4; ++k) {
    e[2 * k] = std::sin(freqs[k] * u);
    e[2 * k + 1] = std::cos(freqs[k] * u);
  }
  return e;
}

int InputCodec::dim() const {
  if (kind == CorruptionKind::gaussian) return m + m * n + m + kSigmaEmbedDim;
  return 2 * n + kSigmaEmbedDim;
}

Eigen::VectorXd InputCodec::encode(const Operator& atilde, const Eigen::VectorXd& y,
                                   double sigma) const {
  Eigen::VectorXd in(dim());
  if (kind == CorruptionKind::gaussian) {
    const auto& g = std::get<GaussianMeasurement>(atilde);
    if (g.m() != m || g.n() != n) throw DimensionError("input codec: operator shape mismatch");
    if (y.size() != m) throw DimensionError("input codec: measurement size mismatch");
    in.segment(0, m) = y;
    for (int r = 0; r < m; ++r) in.segment(m + r * n, n) = g.rows.row(r).transpose();
    for (int r = 0; r < m; ++r) in[m + m * n + r] = g.row_valid[static_cast<std::size_t>(r)] ? 1.0 : 0.0;
    in.segment(m + m * n + m, kSigmaEmbedDim) = sigma_embedding(sigma);
  } else {
    const Mask& mask = std::get<Mask>(atilde);
    if (mask.n() != n) throw DimensionError("input codec: mask size mismatch");
    if (y.size() != n) throw DimensionError("input codec: measurement size mismatch");
    // Zeroing y on erased entries makes the encoding invariant to whatever
    // values x_t carried there.
    for (int i = 0; i < n; ++i) in[i] = mask.observed(i) ? y[i] : 0.0;
    for (int i = 0; i < n; ++i) in[n + i] = mask.observed(i) ? 1.0 : 0.0;
    in.segment(2 * n, kSigmaEmbedDim) = sigma_embedding(sigma);
  }
  return in;
}

}  // namespace ambient
