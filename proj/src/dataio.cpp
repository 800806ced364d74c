#include "ambient/dataio.hpp"

#include <cstring>
#include <fstream>

namespace ambient {

namespace {

constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kKindRandom = 0, kKindBlock = 1, kKindGaussian = 2, kKindRaw = 3;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t off = 0;

  void need(std::size_t k) const {
    if (off + k > buf.size()) throw IoError("dataset file truncated");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(buf[off] | (buf[off + 1] << 8));
    off += 2;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return buf[off++];
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[off + static_cast<std::size_t>(i)]) << (8 * i);
    off += 8;
    return v;
  }
  float f32() {
    need(4);
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= std::uint32_t(buf[off + static_cast<std::size_t>(i)]) << (8 * i);
    off += 4;
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t k) {
    need(k);
    std::string s(buf.begin() + static_cast<long>(off), buf.begin() + static_cast<long>(off + k));
    off += k;
    return s;
  }
};

std::uint8_t kind_tag(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::random_inpainting: return kKindRandom;
    case CorruptionKind::block_inpainting: return kKindBlock;
    case CorruptionKind::gaussian: return kKindGaussian;
  }
  throw ConfigError("dataio: unknown corruption kind");
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
}

std::string fixed_digest(const std::string& digest) {
  if (digest.size() != 16) throw ConfigError("dataio: digest must be 16 hex characters");
  return digest;
}

std::vector<std::uint8_t> serialize_container(const char magic[4], std::uint8_t kind,
                                              const std::string& digest, std::uint64_t n,
                                              std::uint64_t m, std::uint64_t count) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), magic, magic + 4);
  put_u16(out, kVersion);
  out.push_back(kind);
  std::string d = fixed_digest(digest);
  out.insert(out.end(), d.begin(), d.end());
  put_u64(out, n);
  put_u64(out, m);
  put_u64(out, count);
  return out;
}

struct Header {
  std::uint8_t kind;
  std::string digest;
  std::uint64_t n, m, count;
};

Header parse_header(Reader& r, const char expect_magic[4], const char* refuse_hint) {
  std::string magic = r.str(4);
  if (magic == "AMBR" && std::strncmp(expect_magic, "AMBD", 4) == 0)
    throw IoError(std::string("refusing eval-reference file: ") + refuse_hint);
  if (magic != std::string(expect_magic, 4)) throw IoError("bad dataset magic: " + magic);
  if (r.u16() != kVersion) throw IoError("unsupported dataset version");
  Header h;
  h.kind = r.u8();
  h.digest = r.str(16);
  h.n = r.u64();
  h.m = r.u64();
  h.count = r.u64();
  return h;
}

}  // namespace

void write_dataset(const std::string& path, const CorruptedDataset& ds) {
  auto out = serialize_container("AMBD", kind_tag(ds.kind), ds.digest,
                                 static_cast<std::uint64_t>(ds.n),
                                 static_cast<std::uint64_t>(ds.m), ds.records.size());
  for (const TrainExample& ex : ds.records) {
    std::vector<std::uint8_t> op_bytes;
    if (const Mask* mask = std::get_if<Mask>(&ex.op))
      op_bytes = mask->serialize();
    else
      op_bytes = std::get<GaussianMeasurement>(ex.op).serialize();
    out.insert(out.end(), op_bytes.begin(), op_bytes.end());
    for (int i = 0; i < ex.y0.size(); ++i) put_f32(out, static_cast<float>(ex.y0[i]));
  }
  write_file(path, out);
}

CorruptedDataset read_dataset(const std::string& path) {
  auto bytes = read_file(path);
  Reader r{bytes};
  Header h = parse_header(r, "AMBD", "the training path only reads measurement files");
  if (h.kind == kKindRaw) throw IoError("dataset file holds raw samples, not measurements");
  CorruptedDataset ds;
  ds.kind = h.kind == kKindRandom ? CorruptionKind::random_inpainting
            : h.kind == kKindBlock ? CorruptionKind::block_inpainting
                                   : CorruptionKind::gaussian;
  ds.n = static_cast<int>(h.n);
  ds.m = static_cast<int>(h.m);
  ds.digest = h.digest;
  ds.records.reserve(h.count);
  const int meas_dim = h.kind == kKindGaussian ? ds.m : ds.n;
  for (std::uint64_t i = 0; i < h.count; ++i) {
    TrainExample ex;
    std::size_t consumed = 0;
    if (h.kind == kKindGaussian)
      ex.op = GaussianMeasurement::deserialize(bytes.data() + r.off, bytes.size() - r.off,
                                               &consumed);
    else
      ex.op = Mask::deserialize(bytes.data() + r.off, bytes.size() - r.off, &consumed);
    r.off += consumed;
    ex.y0.resize(meas_dim);
    for (int k = 0; k < meas_dim; ++k) ex.y0[k] = static_cast<double>(r.f32());
    ds.records.push_back(std::move(ex));
  }
  return ds;
}

void write_reference(const std::string& path, const Eigen::MatrixXd& x0,
                     const std::string& digest) {
  auto out = serialize_container("AMBR", kKindRaw, digest,
                                 static_cast<std::uint64_t>(x0.rows()), 0,
                                 static_cast<std::uint64_t>(x0.cols()));
  for (long j = 0; j < x0.cols(); ++j)
    for (long i = 0; i < x0.rows(); ++i) put_f32(out, static_cast<float>(x0(i, j)));
  write_file(path, out);
}

Eigen::MatrixXd read_reference(const std::string& path, std::string* digest) {
  auto bytes = read_file(path);
  Reader r{bytes};
  Header h = parse_header(r, "AMBR", "");
  if (h.kind != kKindRaw) throw IoError("reference file with unexpected record kind");
  Eigen::MatrixXd x0(h.n, h.count);
  for (std::uint64_t j = 0; j < h.count; ++j)
    for (std::uint64_t i = 0; i < h.n; ++i)
      x0(static_cast<long>(i), static_cast<long>(j)) = static_cast<double>(r.f32());
  if (digest) *digest = h.digest;
  return x0;
}

void write_samples(const std::string& path, const Eigen::MatrixXd& samples,
                   const std::string& digest) {
  auto out = serialize_container("AMBD", kKindRaw, digest,
                                 static_cast<std::uint64_t>(samples.rows()), 0,
                                 static_cast<std::uint64_t>(samples.cols()));
  for (long j = 0; j < samples.cols(); ++j)
    for (long i = 0; i < samples.rows(); ++i) put_f32(out, static_cast<float>(samples(i, j)));
  write_file(path, out);
}

Eigen::MatrixXd read_samples(const std::string& path, std::string* digest) {
  auto bytes = read_file(path);
  Reader r{bytes};
  Header h = parse_header(r, "AMBD", "sample batches carry the AMBD magic");
  if (h.kind != kKindRaw) throw IoError("sample file with unexpected record kind");
  Eigen::MatrixXd s(h.n, h.count);
  for (std::uint64_t j = 0; j < h.count; ++j)
    for (std::uint64_t i = 0; i < h.n; ++i)
      s(static_cast<long>(i), static_cast<long>(j)) = static_cast<double>(r.f32());
  if (digest) *digest = h.digest;
  return s;
}

GeneratedData generate_dataset(const ExperimentConfig& cfg, ExecPolicy policy) {
  const DataDistribution dist = cfg.data();
  const CorruptionProcess& proc = cfg.corruption;
  proc.validate();
  if (data_dim(dist) != proc.n)
    throw ConfigError("generate_dataset: data dimension does not match corruption n");
  const std::size_t count = cfg.dataset_count;
  if (count == 0) throw ConfigError("generate_dataset: dataset_count must be positive");

  GeneratedData out;
  out.train.kind = proc.kind;
  out.train.n = proc.n;
  out.train.m = proc.kind == CorruptionKind::gaussian ? proc.m : 0;
  out.train.digest = cfg.digest();
  out.train.records.resize(count);
  out.reference.resize(proc.n, static_cast<long>(count));

  const std::uint64_t base = mix64(cfg.seed) ^ 0xDA7A5E7ULL;
  for_each_chunk(policy, count, kDefaultChunks, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Rng rng = Rng::derive(base, i);
      Eigen::VectorXd x0 = sample(dist, rng);
      Operator a = sample_corruption(proc, rng);
      out.train.records[i].y0 = ambient::apply(a, x0);
      out.train.records[i].op = std::move(a);
      out.reference.col(static_cast<long>(i)) = x0;
    }
  });
  return out;
}

}  // namespace ambient
