#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "d3pmlab/denoiser.hpp"
#include "d3pmlab/nelbo.hpp"
#include "d3pmlab/oracles.hpp"

using namespace d3pmlab;

namespace {

Mat fixed_table() {
  Mat table(3, 2);
  table << 0.7, 0.3, 0.2, 0.8, 0.55, 0.45;
  return table;
}

}  // namespace

TEST_CASE("kl of a distribution with itself is zero") {
  Vec p(3);
  p << 0.2, 0.5, 0.3;
  CHECK(kl_categorical(CategoricalDist(p), CategoricalDist(p)) == 0.0);
}

TEST_CASE("kl hand value: point mass against a fair coin") {
  const CategoricalDist p = CategoricalDist::one_hot(2, 0);
  const CategoricalDist q = CategoricalDist::uniform(2);
  CHECK(kl_categorical(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("kl support mismatch is an error") {
  Vec p(2), q(2);
  p << 0.5, 0.5;
  q << 1.0, 0.0;
  try {
    kl_categorical(CategoricalDist(p), CategoricalDist(q));
    FAIL("expected SupportMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::support_mismatch);
  }
}

TEST_CASE("oracle denoiser drives every learnable term to exactly zero") {
  IdMat x0(2, 4);
  x0 << 0, 1, 1, 0, 1, 0, 0, 1;
  const OracleDenoiser dn(x0, 2);
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 5);
  for (const auto mode : {Expectation::sampled, Expectation::exhaustive}) {
    const NelboBreakdown out = nelbo_terms(x0, dn, s, 33, mode);
    out.validate();
    CHECK(out.l_T == 0.0);
    CHECK(out.l_0 == 0.0);
    CHECK(out.mid_sum() == 0.0);
    CHECK(out.total == 0.0);
  }
}

TEST_CASE("uniform denoiser reconstruction loss is log m") {
  // T=1 masks everything, so the reconstruction term is exactly -log(1/m).
  const int m = 5;
  IdMat x0(1, 3);
  x0 << 0, 3, 2;
  const UniformDenoiser dn(m);
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 1);
  const NelboBreakdown out = nelbo_terms(x0, dn, s, 4, Expectation::exhaustive);
  CHECK(out.l_0 == doctest::Approx(std::log(m)).epsilon(1e-12));
  CHECK(out.l_mid.empty());
  CHECK(out.total == doctest::Approx(std::log(m)).epsilon(1e-12));
}

TEST_CASE("exhaustive decomposition matches the trajectory-enumeration oracle") {
  const TabularDenoiser dn(fixed_table());
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 2);
  IdMat x0(1, 1);
  for (TokenId tok = 0; tok < 2; ++tok) {
    x0(0, 0) = tok;
    const NelboBreakdown got = nelbo_terms(x0, dn, s, 8, Expectation::exhaustive);
    const NelboBreakdown want = oracle::nelbo_single_token(tok, dn, s, 2);
    CHECK(got.l_T == doctest::Approx(want.l_T).epsilon(1e-10));
    CHECK(got.l_0 == doctest::Approx(want.l_0).epsilon(1e-10));
    CHECK(got.mid_sum() == doctest::Approx(want.mid_sum()).epsilon(1e-10));
    CHECK(got.total == doctest::Approx(want.total).epsilon(1e-10));
  }
}

TEST_CASE("bound property against the enumerated reverse-chain likelihood") {
  const TabularDenoiser dn(fixed_table());
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 2);
  IdMat x0(1, 1);
  for (TokenId tok = 0; tok < 2; ++tok) {
    x0(0, 0) = tok;
    const double bound = nelbo_terms(x0, dn, s, 3, Expectation::exhaustive).total;
    const double exact = -oracle::reverse_model_logprob_single_token(tok, dn, s, 2);
    CHECK(bound >= exact - 1e-9);
  }
}

TEST_CASE("estimator averaged over every time index equals the sum") {
  const TabularDenoiser dn(fixed_table());
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 2);
  IdMat x0(1, 1);
  x0(0, 0) = 1;
  const NelboBreakdown full = nelbo_terms(x0, dn, s, 6, Expectation::exhaustive);
  double sum = 0.0;
  for (int i = 1; i <= s.T(); ++i) {
    sum += nelbo_detail::per_step_term(x0, dn, s, i, 6, Expectation::exhaustive);
  }
  CHECK(sum == doctest::Approx(full.total - full.l_T).epsilon(1e-10));
}

TEST_CASE("training loss is deterministic in the seed") {
  const TabularDenoiser dn(fixed_table());
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 7);
  IdMat x0(2, 3);
  x0 << 0, 1, 0, 1, 1, 0;
  const TrainingLoss a = training_loss(x0, dn, s, 12345);
  const TrainingLoss b = training_loss(x0, dn, s, 12345);
  CHECK(a.loss == b.loss);
  CHECK(a.time_index == b.time_index);
  CHECK(a.time_index >= 1);
  CHECK(a.time_index <= 7);

  const OracleDenoiser od(x0, 2);
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    CHECK(training_loss(x0, od, s, seed).loss == 0.0);
  }
}

TEST_CASE("neural training step reports the nelbo estimator loss") {
  ModelArch arch;
  arch.embed_dim = 8;
  arch.hidden_dim = 10;
  const int m = 4;
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 5);
  NetParams params = init_denoiser_params(m, 6, arch, 77);
  Rng jitter(3);
  params.for_each([&](const char*, Mat& mat) {
    for (Eigen::Index k = 0; k < mat.size(); ++k) {
      mat.data()[k] += 0.05 * (2.0 * jitter.next_double() - 1.0);
    }
  });
  IdMat x0(2, 6);
  x0 << 0, 1, 2, 3, 0, 1, 3, 2, 1, 0, 3, 2;
  const NeuralDenoiser dn(params);
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto [loss, grads] = denoiser_loss_grads(params, x0, s, seed);
    const TrainingLoss reference = training_loss(x0, dn, s, seed);
    CHECK(loss == doctest::Approx(reference.loss).epsilon(1e-9));
  }
}

TEST_CASE("nelbo breakdown additivity is validated") {
  NelboBreakdown broken;
  broken.l_T = 0.0;
  broken.l_0 = 1.0;
  broken.l_mid = {0.5};
  broken.total = 2.0;  // should be 1.5
  CHECK_THROWS_AS(broken.validate(), Error);
}

TEST_CASE("non-absorbing schedules fail loudly at the prior term") {
  const NoiseSchedule leaky = NoiseSchedule::from_betas({0.5, 0.5});
  IdMat x0(1, 1);
  x0(0, 0) = 0;
  const UniformDenoiser dn(2);
  try {
    nelbo_terms(x0, dn, leaky, 1, Expectation::exhaustive);
    FAIL("expected SupportMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::support_mismatch);
  }
}
