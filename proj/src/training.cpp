#include "ambient/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

namespace ambient {

namespace {

// Zeroes the entries of a measurement that Atilde dropped relative to A.
Eigen::VectorXd restrict_measurement(const Operator& atilde, const Eigen::VectorXd& y0) {
  if (const Mask* mask = std::get_if<Mask>(&atilde)) {
    Eigen::VectorXd out = y0;
    for (int i = 0; i < mask->n(); ++i)
      if (!mask->observed(i)) out[i] = 0.0;
    return out;
  }
  const auto& g = std::get<GaussianMeasurement>(atilde);
  Eigen::VectorXd out = y0;
  for (int r = 0; r < g.m(); ++r)
    if (!g.row_valid[static_cast<std::size_t>(r)]) out[r] = 0.0;
  return out;
}

// Checks that Atilde never resurrects data erased by A.
void check_dominated(const Operator& a, const Operator& atilde) {
  if (const Mask* ma = std::get_if<Mask>(&a)) {
    const Mask& mt = std::get<Mask>(atilde);
    for (int i = 0; i < ma->n(); ++i)
      if (mt.observed(i) && !ma->observed(i))
        throw UsageError("ambient loss: Atilde resurrects a coordinate erased by A");
    return;
  }
  const auto& ga = std::get<GaussianMeasurement>(a);
  const auto& gt = std::get<GaussianMeasurement>(atilde);
  for (int r = 0; r < ga.m(); ++r)
    if (gt.row_valid[static_cast<std::size_t>(r)] && !ga.row_valid[static_cast<std::size_t>(r)])
      throw UsageError("ambient loss: Atilde resurrects a row erased by A");
}

Operator identity_like(const Operator& op, int n) {
  (void)op;
  return Mask::ones(n);
}

}  // namespace

Objective objective_from_name(const std::string& name) {
  if (name == "ambient") return Objective::ambient;
  if (name == "naive") return Objective::naive;
  if (name == "clean") return Objective::clean;
  throw ConfigError("unknown objective: " + name);
}

std::string objective_name(Objective obj) {
  switch (obj) {
    case Objective::ambient: return "ambient";
    case Objective::naive: return "naive";
    case Objective::clean: return "clean";
  }
  return "?";
}

InputCodec codec_for(const CorruptionProcess& proc) {
  InputCodec codec;
  codec.kind = proc.kind;
  codec.n = proc.n;
  codec.m = proc.m;
  return codec;
}

LossResult batch_loss(const Mlp& model, const InputCodec& codec,
                      const std::vector<const TrainExample*>& batch,
                      const CorruptionProcess& proc, const NoiseSchedule& sched, Objective obj,
                      std::uint64_t noise_seed, ExecPolicy policy) {
  const std::size_t bsz = batch.size();
  if (bsz == 0) throw UsageError("batch_loss: empty batch");
  const int n = proc.n;
  const std::size_t chunks = kDefaultChunks;
  std::vector<Eigen::VectorXd> grad_acc(chunks, Eigen::VectorXd::Zero(model.param_count()));
  std::vector<double> loss_acc(chunks, 0.0);

  for_each_chunk(policy, bsz, chunks, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Mlp::Workspace ws;
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = Rng::derive(noise_seed, i);
      const TrainExample& ex = *batch[i];

      Operator loss_op = ex.op;
      Eigen::VectorXd target = ex.y0;
      if (obj == Objective::clean) {
        loss_op = identity_like(ex.op, n);
      }
      Operator atilde = loss_op;
      if (obj == Objective::ambient) {
        atilde = further_corrupt(ex.op, proc, rng);
        check_dominated(ex.op, atilde);
      }

      const double t = sched.sample_time(rng);
      const double sigma = sched.sigma(t);
      Eigen::VectorXd eta(n);
      for (int k = 0; k < n; ++k) eta[k] = rng.gaussian();
      // y_t = Atilde (x0 + sigma eta), assembled from A x0 alone.
      Eigen::VectorXd y_t = restrict_measurement(atilde, target) + sigma * ambient::apply(atilde, eta);

      Eigen::VectorXd pred = model.forward(codec.encode(atilde, y_t, sigma), &ws);
      Eigen::VectorXd resid = ambient::apply(loss_op, pred) - target;
      loss_acc[c] += 0.5 * resid.squaredNorm();
      Eigen::VectorXd out_grad = ambient::apply_transpose(loss_op, resid);
      model.backward_accumulate(ws, out_grad, grad_acc[c]);
    }
  });

  LossResult res;
  res.grad = Eigen::VectorXd::Zero(model.param_count());
  for (std::size_t c = 0; c < chunks; ++c) {
    res.loss += loss_acc[c];
    res.grad += grad_acc[c];
  }
  res.loss /= double(bsz);
  res.grad /= double(bsz);
  res.grad_norm = res.grad.norm();
  return res;
}

double clip_gradient(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (max_norm > 0.0 && norm > max_norm) grad *= max_norm / norm;
  return norm;
}

void adam_step(Mlp& model, AdamState& state, const Eigen::VectorXd& grad, double lr) {
  if (state.m.size() != grad.size()) {
    state.m = Eigen::VectorXd::Zero(grad.size());
    state.v = Eigen::VectorXd::Zero(grad.size());
    state.step = 0;
  }
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  Eigen::ArrayXd mhat = state.m.array() / bc1;
  Eigen::ArrayXd vhat = state.v.array() / bc2;
  model.theta().array() -= lr * mhat / (vhat.sqrt() + state.eps);
  model.round_params_to_f32();
}

std::vector<EvalTriple> make_eval_triples(const DataDistribution& dist,
                                          const CorruptionProcess& proc,
                                          const std::vector<double>& sigmas, int count,
                                          Rng& rng) {
  std::vector<EvalTriple> out;
  out.reserve(static_cast<std::size_t>(count));
  const int n = data_dim(dist);
  for (int i = 0; i < count; ++i) {
    const double sigma = sigmas[static_cast<std::size_t>(i) % sigmas.size()];
    Eigen::VectorXd x0 = sample(dist, rng);
    Operator a = sample_corruption(proc, rng);
    Operator atilde = further_corrupt(a, proc, rng);
    Eigen::VectorXd eta(n);
    for (int k = 0; k < n; ++k) eta[k] = rng.gaussian();
    EvalTriple tr;
    tr.atilde = atilde;
    tr.sigma = sigma;
    tr.y = ambient::apply(atilde, x0 + sigma * eta);
    tr.oracle = posterior_mean(dist, atilde, tr.y, sigma);
    tr.x0 = x0;
    out.push_back(std::move(tr));
  }
  return out;
}

double oracle_gap(const Mlp& model, const InputCodec& codec,
                  const std::vector<EvalTriple>& triples) {
  if (triples.empty()) throw UsageError("oracle_gap: no triples");
  double acc = 0.0;
  for (const EvalTriple& tr : triples) {
    Eigen::VectorXd pred = model.forward(codec.encode(tr.atilde, tr.y, tr.sigma));
    acc += (pred - tr.oracle).norm() / (1.0 + tr.oracle.norm());
  }
  return acc / double(triples.size());
}

TrainResult train(const ExperimentConfig& cfg, const std::vector<TrainExample>& dataset,
                  const TrainOptions& opts) {
  if (dataset.empty()) throw UsageError("train: empty dataset");
  const CorruptionProcess& proc = cfg.corruption;
  const InputCodec codec = codec_for(proc);
  MlpArch arch{codec.dim(), proc.n, cfg.model.hidden_width, cfg.model.hidden_layers};
  Mlp model(arch);
  Rng init_rng = Rng::derive(cfg.seed, 0xA11CE);
  model.init(init_rng);

  const int steps = opts.steps_override >= 0 ? opts.steps_override : cfg.optimizer.steps;
  const int bsz = cfg.optimizer.batch_size;
  AdamState adam;
  Rng batch_rng = Rng::derive(cfg.seed, 0xBA7C4);

  std::vector<EvalTriple> triples;
  if (opts.oracle_dist) {
    Rng eval_rng = Rng::derive(cfg.seed, 0xE7A1);
    triples = make_eval_triples(*opts.oracle_dist, proc, {0.05, 0.2, 1.0}, 256, eval_rng);
  }

  std::ofstream metrics;
  if (!opts.metrics_path.empty()) {
    metrics.open(opts.metrics_path);
    if (!metrics) throw IoError("cannot open metrics log: " + opts.metrics_path);
    metrics << "# config_digest=" << opts.config_digest << "\n";
    metrics << "step,loss,grad_norm,oracle_gap,wall_ms\n";
  }

  Mlp last_good = model;
  const auto t_start = std::chrono::steady_clock::now();
  TrainResult result;
  result.steps_run = 0;

  std::vector<const TrainExample*> batch(static_cast<std::size_t>(bsz));
  for (int step = 1; step <= steps; ++step) {
    for (int b = 0; b < bsz; ++b)
      batch[static_cast<std::size_t>(b)] = &dataset[batch_rng.index(dataset.size())];
    const std::uint64_t noise_seed = mix64(cfg.seed) ^ mix64(static_cast<std::uint64_t>(step));
    LossResult lr = batch_loss(model, codec, batch, proc, cfg.schedule, opts.objective,
                               noise_seed, opts.policy);
    if (!std::isfinite(lr.loss)) {
      // Divergence: keep the last good checkpoint and stop.
      result.model = last_good;
      result.diverged = true;
      result.final_loss = lr.loss;
      if (!opts.checkpoint_path.empty()) last_good.save(opts.checkpoint_path, opts.config_digest);
      return result;
    }
    clip_gradient(lr.grad, cfg.optimizer.clip_max_norm);
    double step_lr = cfg.optimizer.lr;
    if (cfg.optimizer.lr_schedule == "cosine" && steps > 1)
      step_lr *= 0.5 * (1.0 + std::cos(M_PI * double(step - 1) / double(steps)));
    adam_step(model, adam, lr.grad, step_lr);
    result.final_loss = lr.loss;
    result.steps_run = step;

    const bool log_now = !opts.metrics_path.empty() &&
                         (step % opts.metrics_every == 0 || step == steps || step == 1);
    if (log_now) {
      double gap = std::numeric_limits<double>::quiet_NaN();
      if (!triples.empty()) gap = oracle_gap(model, codec, triples);
      auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - t_start)
                    .count();
      metrics << step << "," << lr.loss << "," << lr.grad_norm << "," << gap << "," << ms
              << "\n";
    }
    if (cfg.optimizer.checkpoint_every > 0 && step % cfg.optimizer.checkpoint_every == 0) {
      last_good = model;
      if (!opts.checkpoint_path.empty()) model.save(opts.checkpoint_path, opts.config_digest);
    }
  }
  result.model = model;
  if (!opts.checkpoint_path.empty()) model.save(opts.checkpoint_path, opts.config_digest);
  return result;
}

}  // namespace ambient
