#include "ambient/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace ambient {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_to_vector(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<long>(i)] = a[i].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd json_to_matrix(const json& rows) {
  if (rows.empty()) return Eigen::MatrixXd();
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<long>(r), static_cast<long>(c)) = rows[r][c].get<double>();
  return m;
}

std::string kind_name(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::random_inpainting: return "random_inpainting";
    case CorruptionKind::block_inpainting: return "block_inpainting";
    case CorruptionKind::gaussian: return "gaussian";
  }
  throw ConfigError("unknown corruption kind");
}

CorruptionKind kind_from_name(const std::string& s) {
  if (s == "random_inpainting") return CorruptionKind::random_inpainting;
  if (s == "block_inpainting") return CorruptionKind::block_inpainting;
  if (s == "gaussian") return CorruptionKind::gaussian;
  throw ConfigError("unknown corruption kind: " + s);
}

std::uint64_t fnv1a_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

DataDistribution ExperimentConfig::data() const {
  const json& d = data_spec;
  const std::string family = d.at("family").get<std::string>();
  if (family == "gmm") {
    GmmDistribution g;
    for (const auto& w : d.at("weights")) g.weights.push_back(w.get<double>());
    for (const auto& m : d.at("means")) g.means.push_back(json_to_vector(m));
    for (const auto& c : d.at("covs")) g.covs.push_back(json_to_matrix(c));
    g.validate();
    return g;
  }
  if (family == "canonical_gmm") {
    double angle = d.value("angle_deg", 15.0);
    int embed = d.value("embed_dim", 0);
    GmmDistribution g = canonical_gmm(angle);
    if (embed > 2) g = embed_gmm(g, embed, d.value("embed_seed", std::uint64_t{7}));
    return g;
  }
  if (family == "finite") {
    FiniteDistribution f;
    for (const auto& a : d.at("atoms")) f.atoms.push_back(json_to_vector(a));
    for (const auto& p : d.at("probs")) f.probs.push_back(p.get<double>());
    f.validate();
    return f;
  }
  throw ConfigError("unknown data family: " + family);
}

nlohmann::json data_spec_from(const DataDistribution& dist) {
  json d;
  if (const auto* g = std::get_if<GmmDistribution>(&dist)) {
    d["family"] = "gmm";
    d["weights"] = g->weights;
    json means = json::array(), covs = json::array();
    for (const auto& m : g->means) means.push_back(vector_to_json(m));
    for (const auto& c : g->covs) covs.push_back(matrix_to_json(c));
    d["means"] = means;
    d["covs"] = covs;
  } else {
    const auto& f = std::get<FiniteDistribution>(dist);
    d["family"] = "finite";
    json atoms = json::array();
    for (const auto& a : f.atoms) atoms.push_back(vector_to_json(a));
    d["atoms"] = atoms;
    d["probs"] = f.probs;
  }
  return d;
}

nlohmann::json ExperimentConfig::to_json() const {
  json j;
  j["data"] = data_spec;
  json c;
  c["kind"] = kind_name(corruption.kind);
  c["p"] = corruption.p;
  c["delta"] = corruption.delta;
  c["n"] = corruption.n;
  if (corruption.kind == CorruptionKind::block_inpainting) {
    c["block_size"] = corruption.block_size;
    c["h"] = corruption.shape.h;
    c["w"] = corruption.shape.w;
    c["c"] = corruption.shape.c;
  }
  if (corruption.kind == CorruptionKind::gaussian) {
    c["m"] = corruption.m;
    c["drop_rows"] = corruption.drop_rows;
  }
  j["corruption"] = c;
  j["schedule"] = {{"sigma_min", schedule.sigma_min},
                   {"sigma_max", schedule.sigma_max},
                   {"num_steps", schedule.num_steps}};
  j["model"] = {{"hidden_width", model.hidden_width}, {"hidden_layers", model.hidden_layers}};
  j["optimizer"] = {{"lr", optimizer.lr},
                    {"lr_schedule", optimizer.lr_schedule},
                    {"batch_size", optimizer.batch_size},
                    {"steps", optimizer.steps},
                    {"clip_max_norm", optimizer.clip_max_norm},
                    {"checkpoint_every", optimizer.checkpoint_every}};
  j["sampler"] = {{"kind", sampler.kind},
                  {"guidance_weight", sampler.guidance_weight},
                  {"num_guidance_masks", sampler.num_guidance_masks}};
  j["seed"] = seed;
  j["dataset_count"] = dataset_count;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    cfg.data_spec = j.at("data");
    const json& c = j.at("corruption");
    cfg.corruption.kind = kind_from_name(c.at("kind").get<std::string>());
    cfg.corruption.n = c.at("n").get<int>();
    cfg.corruption.p = c.value("p", 0.0);
    cfg.corruption.delta = c.value("delta", 0.1);
    cfg.corruption.block_size = c.value("block_size", 0);
    cfg.corruption.m = c.value("m", 0);
    cfg.corruption.drop_rows = c.value("drop_rows", 1);
    cfg.corruption.shape = {c.value("h", cfg.corruption.n), c.value("w", 1), c.value("c", 1)};
    if (j.contains("schedule")) {
      const json& s = j.at("schedule");
      cfg.schedule.sigma_min = s.value("sigma_min", cfg.schedule.sigma_min);
      cfg.schedule.sigma_max = s.value("sigma_max", cfg.schedule.sigma_max);
      cfg.schedule.num_steps = s.value("num_steps", cfg.schedule.num_steps);
    }
    if (j.contains("model")) {
      cfg.model.hidden_width = j["model"].value("hidden_width", cfg.model.hidden_width);
      cfg.model.hidden_layers = j["model"].value("hidden_layers", cfg.model.hidden_layers);
    }
    if (j.contains("optimizer")) {
      const json& o = j.at("optimizer");
      cfg.optimizer.lr = o.value("lr", cfg.optimizer.lr);
      cfg.optimizer.lr_schedule = o.value("lr_schedule", cfg.optimizer.lr_schedule);
      if (cfg.optimizer.lr_schedule != "constant" && cfg.optimizer.lr_schedule != "cosine")
        throw ConfigError("optimizer: lr_schedule must be constant or cosine");
      cfg.optimizer.batch_size = o.value("batch_size", cfg.optimizer.batch_size);
      cfg.optimizer.steps = o.value("steps", cfg.optimizer.steps);
      cfg.optimizer.clip_max_norm = o.value("clip_max_norm", cfg.optimizer.clip_max_norm);
      cfg.optimizer.checkpoint_every = o.value("checkpoint_every", cfg.optimizer.checkpoint_every);
    }
    if (j.contains("sampler")) {
      const json& s = j.at("sampler");
      cfg.sampler.kind = s.value("kind", cfg.sampler.kind);
      cfg.sampler.guidance_weight = s.value("guidance_weight", cfg.sampler.guidance_weight);
      cfg.sampler.num_guidance_masks = s.value("num_guidance_masks", cfg.sampler.num_guidance_masks);
    }
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.dataset_count = j.value("dataset_count", std::uint64_t{20000});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config schema violation: ") + e.what());
  }
  cfg.schedule.validate();
  cfg.corruption.validate();
  if (cfg.sampler.kind != "fixed_mask" && cfg.sampler.kind != "reconstruction_guidance")
    throw ConfigError("config: unknown sampler kind " + cfg.sampler.kind);
  if (cfg.sampler.guidance_weight < 0.0)
    throw ConfigError("config: guidance_weight must be nonnegative");
  if (cfg.sampler.num_guidance_masks < 1)
    throw ConfigError("config: num_guidance_masks must be >= 1");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open config for writing: " + path);
  f << to_json().dump(2) << "\n";
}

std::string ExperimentConfig::digest() const {
  // nlohmann::json objects iterate in key order, so dump() is canonical.
  std::uint64_t h = fnv1a_str(to_json().dump());
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace ambient
