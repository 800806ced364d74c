#include "ambient/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ambient {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

struct BlockPos {
  int r, c;
};

// Bounding box of the erased pixels of a one-block mask, in pixel coordinates.
BlockPos find_block(const Mask& mask, const ImageShape& shape) {
  int rmin = shape.h, cmin = shape.w;
  for (int r = 0; r < shape.h; ++r)
    for (int c = 0; c < shape.w; ++c) {
      int idx = (r * shape.w + c) * shape.c;
      if (!mask.observed(idx)) {
        rmin = std::min(rmin, r);
        cmin = std::min(cmin, c);
      }
    }
  if (rmin == shape.h) throw ConfigError("block mask has no erased pixels");
  return {rmin, cmin};
}

void erase_block(Mask& mask, const ImageShape& shape, BlockPos pos, int b) {
  for (int r = pos.r; r < pos.r + b; ++r)
    for (int c = pos.c; c < pos.c + b; ++c)
      for (int ch = 0; ch < shape.c; ++ch)
        mask.diag[static_cast<std::size_t>((r * shape.w + c) * shape.c + ch)] = 0;
}

bool blocks_overlap(BlockPos a, BlockPos b, int size) {
  return !(a.r + size <= b.r || b.r + size <= a.r || a.c + size <= b.c || b.c + size <= a.c);
}

std::vector<BlockPos> all_positions(const ImageShape& shape, int b) {
  std::vector<BlockPos> out;
  for (int r = 0; r + b <= shape.h; ++r)
    for (int c = 0; c + b <= shape.w; ++c) out.push_back({r, c});
  return out;
}

}  // namespace

int Mask::num_observed() const {
  int k = 0;
  for (auto v : diag) k += (v != 0);
  return k;
}

std::vector<std::uint8_t> Mask::serialize() const {
  std::vector<std::uint8_t> out;
  put_u32(out, static_cast<std::uint32_t>(diag.size()));
  out.insert(out.end(), diag.begin(), diag.end());
  return out;
}

Mask Mask::deserialize(const std::uint8_t* data, std::size_t size, std::size_t* consumed) {
  if (size < 4) throw IoError("truncated mask header");
  std::uint32_t n = get_u32(data);
  if (size < 4 + n) throw IoError("truncated mask body");
  Mask m;
  m.diag.assign(data + 4, data + 4 + n);
  for (auto v : m.diag)
    if (v > 1) throw IoError("mask entry not in {0,1}");
  if (consumed) *consumed = 4 + n;
  return m;
}

int GaussianMeasurement::num_valid() const {
  int k = 0;
  for (auto v : row_valid) k += (v != 0);
  return k;
}

std::vector<std::uint8_t> GaussianMeasurement::serialize() const {
  std::vector<std::uint8_t> out;
  put_u32(out, static_cast<std::uint32_t>(rows.rows()));
  put_u32(out, static_cast<std::uint32_t>(rows.cols()));
  for (int r = 0; r < rows.rows(); ++r)
    for (int c = 0; c < rows.cols(); ++c) put_f32(out, static_cast<float>(rows(r, c)));
  return out;
}

GaussianMeasurement GaussianMeasurement::deserialize(const std::uint8_t* data, std::size_t size,
                                                     std::size_t* consumed) {
  if (size < 8) throw IoError("truncated measurement header");
  std::uint32_t m = get_u32(data), n = get_u32(data + 4);
  std::size_t need = 8 + std::size_t(m) * n * 4;
  if (size < need) throw IoError("truncated measurement body");
  GaussianMeasurement g;
  g.rows.resize(m, n);
  const std::uint8_t* p = data + 8;
  for (std::uint32_t r = 0; r < m; ++r)
    for (std::uint32_t c = 0; c < n; ++c, p += 4) g.rows(r, c) = get_f32(p);
  g.row_valid.resize(m);
  for (std::uint32_t r = 0; r < m; ++r)
    g.row_valid[r] = g.rows.row(r).isZero(0.0) ? 0 : 1;
  if (consumed) *consumed = need;
  return g;
}

void CorruptionProcess::validate() const {
  if (n <= 0) throw ConfigError("corruption: n must be positive");
  switch (kind) {
    case CorruptionKind::random_inpainting:
      if (p < 0.0 || p >= 1.0) throw ConfigError("corruption: p must be in [0,1)");
      if (delta < 0.0 || delta >= 1.0) throw ConfigError("corruption: delta must be in [0,1)");
      break;
    case CorruptionKind::block_inpainting:
      if (shape.size() != n) throw ConfigError("corruption: image shape does not match n");
      if (block_size < 1) throw ConfigError("corruption: block_size must be >= 1");
      if (block_size > shape.h || block_size > shape.w)
        throw ConfigError("corruption: block larger than image");
      break;
    case CorruptionKind::gaussian:
      if (m < 1) throw ConfigError("corruption: m must be >= 1");
      if (drop_rows < 1 || drop_rows >= m)
        throw ConfigError("corruption: drop_rows must be in [1, m)");
      break;
  }
}

Operator sample_corruption(const CorruptionProcess& proc, Rng& rng) {
  proc.validate();
  switch (proc.kind) {
    case CorruptionKind::random_inpainting: {
      Mask mask = Mask::zeros(proc.n);
      for (int i = 0; i < proc.n; ++i) mask.diag[static_cast<std::size_t>(i)] = rng.bernoulli(1.0 - proc.p) ? 1 : 0;
      return mask;
    }
    case CorruptionKind::block_inpainting: {
      Mask mask = Mask::ones(proc.n);
      auto positions = all_positions(proc.shape, proc.block_size);
      BlockPos pos = positions[rng.index(positions.size())];
      erase_block(mask, proc.shape, pos, proc.block_size);
      return mask;
    }
    case CorruptionKind::gaussian: {
      GaussianMeasurement g;
      g.rows.resize(proc.m, proc.n);
      for (int r = 0; r < proc.m; ++r)
        for (int c = 0; c < proc.n; ++c) g.rows(r, c) = rng.gaussian();
      g.row_valid.assign(static_cast<std::size_t>(proc.m), 1);
      return g;
    }
  }
  throw ConfigError("corruption: unknown kind");
}

Operator further_corrupt(const Operator& a, const CorruptionProcess& proc, Rng& rng) {
  switch (proc.kind) {
    case CorruptionKind::random_inpainting: {
      const Mask& mask = std::get<Mask>(a);
      Mask out = mask;
      for (int i = 0; i < mask.n(); ++i)
        if (mask.observed(i) && rng.bernoulli(proc.delta)) out.diag[static_cast<std::size_t>(i)] = 0;
      return out;
    }
    case CorruptionKind::block_inpainting: {
      const Mask& mask = std::get<Mask>(a);
      BlockPos primary = find_block(mask, proc.shape);
      std::vector<BlockPos> candidates;
      for (BlockPos pos : all_positions(proc.shape, proc.block_size))
        if (!blocks_overlap(primary, pos, proc.block_size)) candidates.push_back(pos);
      if (candidates.empty())
        throw ConfigError("block further corruption: no non-overlapping placement exists");
      Mask out = mask;
      erase_block(out, proc.shape, candidates[rng.index(candidates.size())], proc.block_size);
      return out;
    }
    case CorruptionKind::gaussian: {
      GaussianMeasurement out = std::get<GaussianMeasurement>(a);
      for (int d = 0; d < proc.drop_rows; ++d) {
        std::vector<int> alive;
        for (int r = 0; r < out.m(); ++r)
          if (out.row_valid[static_cast<std::size_t>(r)]) alive.push_back(r);
        if (alive.empty()) throw ConfigError("gaussian further corruption: no surviving row");
        int victim = alive[rng.index(alive.size())];
        out.rows.row(victim).setZero();
        out.row_valid[static_cast<std::size_t>(victim)] = 0;
      }
      return out;
    }
  }
  throw ConfigError("corruption: unknown kind");
}

Eigen::VectorXd apply(const Operator& op, const Eigen::VectorXd& x) {
  if (const Mask* mask = std::get_if<Mask>(&op)) {
    if (mask->n() != x.size()) throw DimensionError("apply: mask/vector size mismatch");
    Eigen::VectorXd out = x;
    for (int i = 0; i < mask->n(); ++i)
      if (!mask->observed(i)) out[i] = 0.0;
    return out;
  }
  const auto& g = std::get<GaussianMeasurement>(op);
  if (g.n() != x.size()) throw DimensionError("apply: measurement/vector size mismatch");
  return g.rows * x;
}

Eigen::VectorXd apply_transpose(const Operator& op, const Eigen::VectorXd& r) {
  if (const Mask* mask = std::get_if<Mask>(&op)) {
    if (mask->n() != r.size()) throw DimensionError("apply_transpose: size mismatch");
    Eigen::VectorXd out = r;
    for (int i = 0; i < mask->n(); ++i)
      if (!mask->observed(i)) out[i] = 0.0;
    return out;
  }
  const auto& g = std::get<GaussianMeasurement>(op);
  if (g.m() != r.size()) throw DimensionError("apply_transpose: size mismatch");
  return g.rows.transpose() * r;
}

int measurement_dim(const Operator& op, int n) {
  if (std::holds_alternative<Mask>(op)) return n;
  return std::get<GaussianMeasurement>(op).m();
}

double inpainting_posterior_q(double p, double delta) {
  if (p == 0.0) return 1.0;  // A is always the identity
  return (1.0 - p) * delta / ((1.0 - p) * delta + p);
}

Eigen::MatrixXd conditional_second_moment(const CorruptionProcess& proc, const Operator& atilde) {
  switch (proc.kind) {
    case CorruptionKind::random_inpainting: {
      const Mask& mask = std::get<Mask>(atilde);
      double q = inpainting_posterior_q(proc.p, proc.delta);
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(mask.n(), mask.n());
      for (int i = 0; i < mask.n(); ++i) out(i, i) = mask.observed(i) ? 1.0 : q;
      return out;
    }
    case CorruptionKind::gaussian: {
      const auto& g = std::get<GaussianMeasurement>(atilde);
      int dropped = g.m() - g.num_valid();
      return g.rows.transpose() * g.rows +
             double(dropped) * Eigen::MatrixXd::Identity(g.n(), g.n());
    }
    case CorruptionKind::block_inpainting:
      throw ConfigError(
          "conditional_second_moment: no closed form for block inpainting, "
          "use estimate_second_moment");
  }
  throw ConfigError("corruption: unknown kind");
}

Operator sample_conditional(const CorruptionProcess& proc, const Operator& atilde, Rng& rng) {
  switch (proc.kind) {
    case CorruptionKind::random_inpainting: {
      const Mask& mask = std::get<Mask>(atilde);
      double q = inpainting_posterior_q(proc.p, proc.delta);
      Mask out = mask;
      for (int i = 0; i < mask.n(); ++i)
        if (!mask.observed(i)) out.diag[static_cast<std::size_t>(i)] = rng.bernoulli(q) ? 1 : 0;
      return out;
    }
    case CorruptionKind::gaussian: {
      // Conditional on Atilde, the erased rows of A are fresh N(0, I_n) draws.
      GaussianMeasurement out = std::get<GaussianMeasurement>(atilde);
      for (int r = 0; r < out.m(); ++r)
        if (!out.row_valid[static_cast<std::size_t>(r)]) {
          for (int c = 0; c < out.n(); ++c) out.rows(r, c) = rng.gaussian();
          out.row_valid[static_cast<std::size_t>(r)] = 1;
        }
      return out;
    }
    case CorruptionKind::block_inpainting: {
      const Mask& target = std::get<Mask>(atilde);
      constexpr std::size_t kMaxAttempts = 400000;
      constexpr double kRateFloor = 1e-5;
      for (std::size_t attempt = 1; attempt <= kMaxAttempts; ++attempt) {
        Operator a = sample_corruption(proc, rng);
        Operator at = further_corrupt(a, proc, rng);
        if (std::get<Mask>(at).diag == target.diag) return a;
        if (attempt == kMaxAttempts) break;
      }
      throw NumericalError("block conditional sampling: acceptance rate below " +
                           std::to_string(kRateFloor) + " after " +
                           std::to_string(kMaxAttempts) + " attempts");
    }
  }
  throw ConfigError("corruption: unknown kind");
}

MomentEstimate estimate_second_moment(const CorruptionProcess& proc, const Operator& atilde,
                                      std::size_t num_samples, Rng& rng, ExecPolicy policy) {
  if (num_samples < 100) throw ConfigError("estimate_second_moment: need at least 100 samples");
  const int n = proc.n;
  const std::size_t chunks = kDefaultChunks;
  std::vector<Eigen::MatrixXd> sum(chunks, Eigen::MatrixXd::Zero(n, n));
  std::vector<Eigen::MatrixXd> sumsq(chunks, Eigen::MatrixXd::Zero(n, n));
  const std::uint64_t base = rng.next_u64();

  for_each_chunk(policy, num_samples, chunks, [&](std::size_t c, std::size_t b, std::size_t e) {
    Rng local = Rng::derive(base, c);
    for (std::size_t i = b; i < e; ++i) {
      Operator a = sample_conditional(proc, atilde, local);
      Eigen::MatrixXd ata;
      if (const Mask* mask = std::get_if<Mask>(&a)) {
        ata = Eigen::MatrixXd::Zero(n, n);
        for (int k = 0; k < n; ++k) ata(k, k) = mask->observed(k) ? 1.0 : 0.0;
      } else {
        const auto& g = std::get<GaussianMeasurement>(a);
        ata = g.rows.transpose() * g.rows;
      }
      sum[c] += ata;
      sumsq[c] += ata.cwiseProduct(ata);
    }
  });

  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd total_sq = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t c = 0; c < chunks; ++c) {
    total += sum[c];
    total_sq += sumsq[c];
  }
  MomentEstimate est;
  est.num_samples = num_samples;
  const double ns = static_cast<double>(num_samples);
  est.mean = total / ns;
  Eigen::MatrixXd var = (total_sq / ns - est.mean.cwiseProduct(est.mean)).cwiseMax(0.0);
  est.std_error = (var / ns).cwiseSqrt();
  return est;
}

}  // namespace ambient
