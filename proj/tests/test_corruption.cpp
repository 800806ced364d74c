#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ambient/corruption.hpp"
#include "ambient/population.hpp"

using namespace ambient;

namespace {

CorruptionProcess inpainting(int n, double p, double delta) {
  CorruptionProcess proc;
  proc.kind = CorruptionKind::random_inpainting;
  proc.n = n;
  proc.p = p;
  proc.delta = delta;
  return proc;
}

CorruptionProcess block(int h, int w, int bsize) {
  CorruptionProcess proc;
  proc.kind = CorruptionKind::block_inpainting;
  proc.n = h * w;
  proc.shape = {h, w, 1};
  proc.block_size = bsize;
  return proc;
}

CorruptionProcess gaussian(int m, int n, int drop = 1) {
  CorruptionProcess proc;
  proc.kind = CorruptionKind::gaussian;
  proc.m = m;
  proc.n = n;
  proc.drop_rows = drop;
  return proc;
}

}  // namespace

TEST_CASE("random inpainting erasure frequency matches p within 3 SE") {
  const int n = 16, trials = 20000;
  for (double p : {0.2, 0.5, 0.8}) {
    CorruptionProcess proc = inpainting(n, p, 0.1);
    Rng rng(42);
    long erased = 0;
    for (int t = 0; t < trials; ++t) {
      Operator a = sample_corruption(proc, rng);
      erased += n - std::get<Mask>(a).num_observed();
    }
    const double total = double(trials) * n;
    const double freq = double(erased) / total;
    const double se = std::sqrt(p * (1.0 - p) / total);
    CHECK(std::abs(freq - p) < 3.0 * se);
  }
}

TEST_CASE("further corruption only erases, never restores") {
  CorruptionProcess proc = inpainting(32, 0.4, 0.3);
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    Operator a = sample_corruption(proc, rng);
    Operator at = further_corrupt(a, proc, rng);
    const Mask& ma = std::get<Mask>(a);
    const Mask& mt = std::get<Mask>(at);
    for (int i = 0; i < 32; ++i) {
      if (!ma.observed(i)) CHECK(!mt.observed(i));
    }
  }
}

TEST_CASE("further corruption erasure rate on survivors matches delta within 3 SE") {
  CorruptionProcess proc = inpainting(16, 0.3, 0.25);
  Rng rng(11);
  long survivors = 0, dropped = 0;
  for (int t = 0; t < 20000; ++t) {
    Operator a = sample_corruption(proc, rng);
    Operator at = further_corrupt(a, proc, rng);
    const Mask& ma = std::get<Mask>(a);
    const Mask& mt = std::get<Mask>(at);
    for (int i = 0; i < 16; ++i) {
      if (!ma.observed(i)) continue;
      ++survivors;
      dropped += mt.observed(i) ? 0 : 1;
    }
  }
  const double rate = double(dropped) / double(survivors);
  const double se = std::sqrt(0.25 * 0.75 / double(survivors));
  CHECK(std::abs(rate - 0.25) < 3.0 * se);
}

TEST_CASE("delta=0 makes further corruption the identity") {
  CorruptionProcess proc = inpainting(16, 0.5, 0.0);
  Rng rng(3);
  Operator a = sample_corruption(proc, rng);
  Operator at = further_corrupt(a, proc, rng);
  CHECK(std::get<Mask>(a).diag == std::get<Mask>(at).diag);
}

TEST_CASE("posterior q matches Bayes enumeration over the joint table") {
  for (double p : {0.2, 0.5, 0.8}) {
    for (double delta : {0.05, 0.1, 0.3}) {
      // P(A=1 | Atilde=0) from the three possible (A, Atilde) outcomes.
      const double p11 = (1.0 - p) * (1.0 - delta);
      const double p10 = (1.0 - p) * delta;
      const double p00 = p;
      CHECK(p11 + p10 + p00 == doctest::Approx(1.0).epsilon(1e-12));
      const double expect = p10 / (p10 + p00);
      CHECK(inpainting_posterior_q(p, delta) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  CHECK(inpainting_posterior_q(0.0, 0.1) == 1.0);
}

TEST_CASE("closed-form second moment agrees with the enumeration route") {
  Mask atilde = Mask::ones(6);
  atilde.diag[1] = 0;
  atilde.diag[4] = 0;
  for (double p : {0.2, 0.5, 0.8}) {
    for (double delta : {0.1, 0.5}) {
      CorruptionProcess proc = inpainting(6, p, delta);
      Eigen::MatrixXd closed = conditional_second_moment(proc, Operator{atilde});
      Eigen::MatrixXd bayes = bayes_second_moment(atilde, p, delta);
      CHECK((closed - bayes).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("Monte-Carlo conditional second moment matches closed form, inpainting") {
  CorruptionProcess proc = inpainting(6, 0.5, 0.2);
  Rng rng(19);
  Operator a = sample_corruption(proc, rng);
  Operator atilde = further_corrupt(a, proc, rng);
  Eigen::MatrixXd closed = conditional_second_moment(proc, atilde);
  MomentEstimate est = estimate_second_moment(proc, atilde, 100000, rng);
  for (int i = 0; i < 6; ++i) {
    const double se = std::max(est.std_error(i, i), 1e-9);
    CHECK(std::abs(est.mean(i, i) - closed(i, i)) < 3.0 * se);
  }
}

TEST_CASE("Monte-Carlo conditional second moment matches closed form, gaussian") {
  CorruptionProcess proc = gaussian(4, 6);
  Rng rng(23);
  Operator a = sample_corruption(proc, rng);
  Operator atilde = further_corrupt(a, proc, rng);
  Eigen::MatrixXd closed = conditional_second_moment(proc, atilde);
  MomentEstimate est = estimate_second_moment(proc, atilde, 100000, rng);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) {
      const double se = std::max(est.std_error(r, c), 1e-9);
      CHECK(std::abs(est.mean(r, c) - closed(r, c)) < 4.0 * se);
    }
}

TEST_CASE("gaussian closed form is Atilde^T Atilde plus dropped-count identity") {
  CorruptionProcess proc = gaussian(5, 4, 2);
  Rng rng(5);
  Operator a = sample_corruption(proc, rng);
  Operator atilde = further_corrupt(a, proc, rng);
  const auto& g = std::get<GaussianMeasurement>(atilde);
  CHECK(g.num_valid() == 3);
  Eigen::MatrixXd closed = conditional_second_moment(proc, atilde);
  Eigen::MatrixXd expect =
      g.rows.transpose() * g.rows + 2.0 * Eigen::MatrixXd::Identity(4, 4);
  CHECK((closed - expect).cwiseAbs().maxCoeff() < 1e-12);
  // Full rank even though Atilde itself is rank deficient.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(closed);
  CHECK(es.eigenvalues().minCoeff() >= 1.0);
}

TEST_CASE("inpainting second moment minimum eigenvalue is q > 0") {
  CorruptionProcess proc = inpainting(8, 0.5, 0.1);
  Mask atilde = Mask::zeros(8);
  atilde.diag[0] = atilde.diag[3] = 1;
  Eigen::MatrixXd m = conditional_second_moment(proc, Operator{atilde});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double q = inpainting_posterior_q(0.5, 0.1);
  CHECK(es.eigenvalues().minCoeff() == doctest::Approx(q).epsilon(1e-12));
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("block further corruption places a second non-overlapping block") {
  CorruptionProcess proc = block(6, 6, 2);
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    Operator a = sample_corruption(proc, rng);
    Operator at = further_corrupt(a, proc, rng);
    const int erased_a = 36 - std::get<Mask>(a).num_observed();
    const int erased_t = 36 - std::get<Mask>(at).num_observed();
    CHECK(erased_a == 4);
    CHECK(erased_t == 8);  // disjoint blocks, no double counting
  }
}

TEST_CASE("block further corruption with no legal placement throws") {
  CorruptionProcess proc = block(2, 2, 2);
  Rng rng(1);
  Operator a = sample_corruption(proc, rng);
  CHECK_THROWS_AS(further_corrupt(a, proc, rng), ConfigError);
}

TEST_CASE("block kind has no closed-form second moment") {
  CorruptionProcess proc = block(4, 4, 2);
  Rng rng(2);
  Operator a = sample_corruption(proc, rng);
  CHECK_THROWS_AS(conditional_second_moment(proc, a), ConfigError);
}

TEST_CASE("apply and apply_transpose agree with dense matrix forms") {
  Rng rng(13);
  Mask mask = Mask::ones(5);
  mask.diag[2] = 0;
  Eigen::VectorXd x(5), r(5);
  for (int i = 0; i < 5; ++i) {
    x[i] = rng.gaussian();
    r[i] = rng.gaussian();
  }
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i < 5; ++i) dense(i, i) = mask.observed(i) ? 1.0 : 0.0;
  CHECK((ambient::apply(Operator{mask}, x) - dense * x).norm() < 1e-15);
  CHECK((ambient::apply_transpose(Operator{mask}, r) - dense.transpose() * r).norm() < 1e-15);
  // Masks are projections: applying twice is applying once.
  CHECK((ambient::apply(Operator{mask}, ambient::apply(Operator{mask}, x)) - ambient::apply(Operator{mask}, x)).norm() ==
        0.0);

  CorruptionProcess proc = gaussian(3, 5);
  Operator g = sample_corruption(proc, rng);
  const auto& gm = std::get<GaussianMeasurement>(g);
  Eigen::VectorXd r3(3);
  for (int i = 0; i < 3; ++i) r3[i] = rng.gaussian();
  CHECK((ambient::apply(g, x) - gm.rows * x).norm() < 1e-15);
  CHECK((ambient::apply_transpose(g, r3) - gm.rows.transpose() * r3).norm() < 1e-15);
}

TEST_CASE("mask and measurement serialization round-trip") {
  Rng rng(17);
  Mask mask = Mask::ones(9);
  mask.diag[4] = 0;
  mask.diag[8] = 0;
  auto bytes = mask.serialize();
  std::size_t consumed = 0;
  Mask back = Mask::deserialize(bytes.data(), bytes.size(), &consumed);
  CHECK(consumed == bytes.size());
  CHECK(back.diag == mask.diag);
  CHECK_THROWS_AS(Mask::deserialize(bytes.data(), bytes.size() - 1, nullptr), IoError);

  CorruptionProcess proc = gaussian(3, 4);
  Operator g = sample_corruption(proc, rng);
  Operator gt = further_corrupt(g, proc, rng);
  auto gbytes = std::get<GaussianMeasurement>(gt).serialize();
  GaussianMeasurement gback =
      GaussianMeasurement::deserialize(gbytes.data(), gbytes.size(), &consumed);
  CHECK(consumed == gbytes.size());
  CHECK(gback.row_valid == std::get<GaussianMeasurement>(gt).row_valid);
  // Values are stored as f32; the round trip is exact after one write.
  auto again = gback.serialize();
  CHECK(again == gbytes);
}

TEST_CASE("conditional sampling reproduces the q marginal") {
  CorruptionProcess proc = inpainting(10, 0.4, 0.2);
  Mask atilde = Mask::ones(10);
  for (int i = 0; i < 5; ++i) atilde.diag[static_cast<std::size_t>(i)] = 0;
  const double q = inpainting_posterior_q(0.4, 0.2);
  Rng rng(29);
  long on = 0;
  const int trials = 40000;
  for (int t = 0; t < trials; ++t) {
    Operator a = sample_conditional(proc, Operator{atilde}, rng);
    const Mask& ma = std::get<Mask>(a);
    for (int i = 0; i < 5; ++i) on += ma.observed(i) ? 1 : 0;
    for (int i = 5; i < 10; ++i) CHECK(ma.observed(i));
  }
  const double freq = double(on) / double(5 * trials);
  const double se = std::sqrt(q * (1.0 - q) / double(5 * trials));
  CHECK(std::abs(freq - q) < 3.0 * se);
}

TEST_CASE("invalid corruption specs are rejected") {
  CHECK_THROWS_AS(inpainting(0, 0.5, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(inpainting(4, 1.0, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(inpainting(4, 0.5, 1.0).validate(), ConfigError);
  CHECK_THROWS_AS(inpainting(4, -0.1, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(block(4, 4, 5).validate(), ConfigError);
  CHECK_THROWS_AS(gaussian(3, 4, 3).validate(), ConfigError);
  CHECK_NOTHROW(inpainting(4, 0.0, 0.0).validate());
}
