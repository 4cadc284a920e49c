#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "d3pmlab/denoiser.hpp"
#include "d3pmlab/diffusion.hpp"
#include "d3pmlab/oracles.hpp"
#include "d3pmlab/rng.hpp"

using namespace d3pmlab;

TEST_CASE("absorbing-uniform schedule has the exact telescoping form") {
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 4);
  CHECK(s.beta(1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s.beta(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s.beta(3) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.beta(4) == 1.0);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(1) == 0.75);
  CHECK(s.alpha_bar(2) == 0.5);
  CHECK(s.alpha_bar(3) == 0.25);
  CHECK(s.alpha_bar(4) == 0.0);
  CHECK(s.s_time(1) == 0.0);
  CHECK(s.t_time(4) == 1.0);
}

TEST_CASE("one-step schedules mask fully") {
  for (const auto kind : {ScheduleKind::absorbing_uniform, ScheduleKind::linear}) {
    const NoiseSchedule s = build_schedule(kind, 1);
    CHECK(s.beta(1) == 1.0);
    CHECK(s.alpha_bar(1) == 0.0);
  }
}

TEST_CASE("midpoint retention at T=1000 is exactly one half") {
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 1000);
  CHECK(s.alpha_bar(500) == 0.5);
  CHECK(s.alpha_bar(1000) == 0.0);
}

TEST_CASE("bad schedule parameters are rejected") {
  CHECK_THROWS_AS(build_schedule(ScheduleKind::linear, 0), Error);
  CHECK_THROWS_AS(NoiseSchedule::from_betas({1.5}), Error);
  CHECK_THROWS_AS(NoiseSchedule::from_betas({0.0}), Error);
}

TEST_CASE("step matrix matches the worked 5x5 example") {
  const Mat q = step_matrix(0.3, 4);
  REQUIRE(q.rows() == 5);
  for (int j = 0; j < 4; ++j) {
    for (int k = 0; k < 5; ++k) {
      const double want = k == j ? 0.7 : (k == 4 ? 0.3 : 0.0);
      CHECK(q(j, k) == doctest::Approx(want).epsilon(1e-15));
    }
  }
  CHECK(q(4, 0) == 0.0);
  CHECK(q(4, 4) == 1.0);
  CHECK((q.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("degenerate betas give the identity and the all-mask matrix") {
  CHECK(step_matrix(0.0, 3).isIdentity(0.0));
  const Mat full = step_matrix(1.0, 3);
  for (int j = 0; j <= 3; ++j) {
    CHECK(full(j, 3) == 1.0);
    CHECK(full.row(j).head(3).isZero(0.0));
  }
  CHECK_THROWS_AS(step_matrix(-0.1, 3), Error);
  CHECK_THROWS_AS(step_matrix(1.1, 3), Error);
}

TEST_CASE("cumulative matrix: empty product, worked value, and full masking") {
  const NoiseSchedule s = NoiseSchedule::from_betas({0.3, 0.3, 0.3});
  CHECK(cumulative_matrix(s, 0, 4).isIdentity(0.0));
  const Mat two = cumulative_matrix(s, 2, 4);
  CHECK(two(0, 0) == doctest::Approx(0.49).epsilon(1e-14));
  CHECK(two(0, 4) == doctest::Approx(0.51).epsilon(1e-14));
  const Mat product = cumulative_matrix_product(s, 2, 4);
  CHECK((two - product).cwiseAbs().maxCoeff() < 1e-12);

  const NoiseSchedule full = build_schedule(ScheduleKind::linear, 3);
  const Mat at_T = cumulative_matrix(full, 3, 4);
  for (int j = 0; j <= 4; ++j) CHECK(at_T(j, 4) == 1.0);
  CHECK_THROWS_AS(cumulative_matrix(s, 4, 4), Error);
}

TEST_CASE("forward marginal cases") {
  const NoiseSchedule s = NoiseSchedule::from_betas({0.3, 0.3, 0.3});
  const CategoricalDist start = forward_marginal(2, s, 0, 4);
  CHECK(start.probs[2] == 1.0);
  const CategoricalDist mid = forward_marginal(2, s, 2, 4);
  CHECK(mid.probs[2] == doctest::Approx(0.49).epsilon(1e-14));
  CHECK(mid.probs[4] == doctest::Approx(0.51).epsilon(1e-14));
  const NoiseSchedule full = build_schedule(ScheduleKind::absorbing_uniform, 3);
  CHECK(forward_marginal(1, full, 3, 4).probs[4] == 1.0);
  CHECK_THROWS_AS(forward_marginal(4, s, 1, 4), Error);  // mask as clean
}

TEST_CASE("chapman-kolmogorov composition of marginals") {
  Rng rng(31);
  std::vector<double> betas;
  for (int k = 0; k < 6; ++k) betas.push_back(0.1 + 0.5 * rng.next_double());
  const NoiseSchedule s = NoiseSchedule::from_betas(betas);
  const int m = 5;
  for (int j = 0; j < 6; ++j) {
    for (int i = j + 1; i <= 6; ++i) {
      Mat kernel = Mat::Identity(m + 1, m + 1);
      for (int k = j + 1; k <= i; ++k) kernel = kernel * step_matrix(s.beta(k), m);
      for (TokenId x0 = 0; x0 < m; ++x0) {
        const Vec direct = forward_marginal(x0, s, i, m).probs;
        const Vec composed = kernel.transpose() * forward_marginal(x0, s, j, m).probs;
        CHECK((direct - composed).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("forward samples: boundary, determinism, concentration") {
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 2);
  const int m = 4;
  IdMat clean = IdMat::Zero(4, 25000);
  clean.setConstant(2);

  const NoisyState at_T = forward_sample(clean, s, 2, m, 7);
  CHECK((at_T.ids.array() == m).all());

  const NoisyState a = forward_sample(clean, s, 1, m, 7);
  const NoisyState b = forward_sample(clean, s, 1, m, 7);
  CHECK((a.ids.array() == b.ids.array()).all());

  const double masked =
      static_cast<double>((a.ids.array() == m).count()) / static_cast<double>(clean.size());
  CHECK(std::abs(masked - 0.5) <= 0.01);  // alpha_bar(1) = 0.5, 1e5 positions
}

TEST_CASE("forward trajectories never unmask") {
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 8);
  const int m = 3;
  IdMat clean(2, 16);
  for (int b = 0; b < 2; ++b) {
    for (int p = 0; p < 16; ++p) clean(b, p) = (b + p) % m;
  }
  NoisyState state{clean, 0};
  for (int i = 1; i <= 8; ++i) {
    const NoisyState next = forward_step_sample(state, s, i, m, 13);
    for (int b = 0; b < 2; ++b) {
      for (int p = 0; p < 16; ++p) {
        if (state.ids(b, p) == m) CHECK(next.ids(b, p) == m);
      }
    }
    state = next;
  }
  CHECK((state.ids.array() == m).all());  // beta_T = 1
}

TEST_CASE("posterior structure: clamping and boundary unmasking") {
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 4);
  const int m = 9;
  const CategoricalDist x0 = CategoricalDist::one_hot(m, 4);

  const CategoricalDist clamped = posterior(7, x0, s, 3, 1, m);
  CHECK(clamped.probs[7] == 1.0);
  CHECK(clamped.probs.sum() == 1.0);

  const CategoricalDist unmasked = posterior(m, x0, s, 3, 0, m);
  CHECK(unmasked.probs[4] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(unmasked.probs[m] == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(posterior(m, x0, s, 2, 2, m), Error);
  CHECK_THROWS_AS(posterior(m, x0, s, 2, 3, m), Error);
}

TEST_CASE("posterior matches the enumerated Bayes oracle") {
  const int m = 3;
  const NoiseSchedule s = NoiseSchedule::from_betas({0.25, 0.4, 0.35});
  for (TokenId x0_id = 0; x0_id < m; ++x0_id) {
    const CategoricalDist x0 = CategoricalDist::one_hot(m + 1, x0_id);
    for (int i = 1; i <= 3; ++i) {
      for (int j = 0; j < i; ++j) {
        const CategoricalDist got = posterior(m, x0, s, i, j, m);
        const CategoricalDist want = oracle::posterior_bayes(m, x0, s, i, j, m);
        CHECK(total_variation(got, want) < 1e-10);
        CHECK(std::abs(got.probs.sum() - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("posterior normalization over randomized soft predictions") {
  Rng rng(55);
  const int m = 6;
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 10);
  for (int trial = 0; trial < 200; ++trial) {
    Vec soft(m);
    for (int k = 0; k < m; ++k) soft[k] = 0.01 + rng.next_double();
    soft /= soft.sum();
    const int i = 1 + rng.uniform_int(10);
    const int j = rng.uniform_int(i);
    const CategoricalDist out = posterior(m, CategoricalDist(soft), s, i, j, m);
    CHECK(std::abs(out.probs.sum() - 1.0) < 1e-12);
    CHECK(out.probs.minCoeff() >= 0.0);
  }
}

TEST_CASE("ancestral sampling reproduces a degenerate denoiser exactly") {
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 6);
  IdMat target(3, 5);
  for (int b = 0; b < 3; ++b) {
    for (int p = 0; p < 5; ++p) target(b, p) = (2 * b + p) % 4;
  }
  const OracleDenoiser oracle_dn(target, 4);
  for (const std::uint64_t seed : {1ull, 9ull, 77ull}) {
    for (const int steps : {1, 3, 6}) {
      auto [ids, stats] = ancestral_sample(oracle_dn, s, 3, 5, steps, seed);
      CHECK((ids.array() == target.array()).all());
      CHECK(stats.steps == steps);
    }
  }
}

TEST_CASE("single-jump sampling draws straight from the prediction at T") {
  // With steps=1 the sub-grid is {T, 0}: the posterior collapses onto the
  // denoiser output, so sampled frequencies track the table.
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 4);
  const int m = 2;
  Mat table(m + 1, m);
  table << 0.25, 0.75, 0.25, 0.75, 0.25, 0.75;
  const TabularDenoiser dn(table);
  auto [ids, stats] = ancestral_sample(dn, s, 25, 1000, 1, 5);
  const double ones =
      static_cast<double>((ids.array() == 1).count()) / static_cast<double>(ids.size());
  CHECK(std::abs(ones - 0.75) < 0.01);
}

TEST_CASE("uniform denoiser produces a uniform empirical marginal") {
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 4);
  const int m = 4;
  const UniformDenoiser dn(m);
  auto [ids, stats] = ancestral_sample(dn, s, 10, 10000, 4, 21);
  for (int k = 0; k < m; ++k) {
    const double frac =
        static_cast<double>((ids.array() == k).count()) / static_cast<double>(ids.size());
    CHECK(std::abs(frac - 0.25) <= 0.01);
  }
}

TEST_CASE("denoiser mass on the mask state is rejected") {
  struct BadDenoiser : Denoiser {
    int num_real_tokens() const override { return 3; }
    Mat denoise(const IdMat& ids, double) const override {
      return Mat::Constant(ids.size(), 4, 0.25);  // m+1 columns, mask loaded
    }
  };
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 2);
  const BadDenoiser bad;
  try {
    ancestral_sample(bad, s, 1, 4, 2, 3);
    FAIL("expected DenoiserMassOnMask");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::denoiser_mass_on_mask);
  }
}
