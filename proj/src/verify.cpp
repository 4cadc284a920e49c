#include <cmath>
#include <sstream>

#include "d3pmlab/ar.hpp"
#include "d3pmlab/denoiser.hpp"
#include "d3pmlab/harness.hpp"
#include "d3pmlab/oracles.hpp"

namespace d3pmlab {
namespace {

struct Checker {
  std::ostringstream detail;
  int failures = 0;
  int checks = 0;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) {
      ++failures;
      if (failures <= 8) detail << what << "; ";
    }
  }

  SuiteResult finish(const std::string& name) {
    SuiteResult result;
    result.name = name;
    result.passed = failures == 0;
    std::ostringstream summary;
    summary << checks - failures << "/" << checks << " checks passed";
    if (failures > 0) summary << ": " << detail.str();
    result.detail = summary.str();
    return result;
  }
};

NoiseSchedule random_schedule(int T, Rng rng) {
  std::vector<double> betas(static_cast<std::size_t>(T));
  for (auto& b : betas) b = 0.05 + 0.9 * rng.next_double();
  return NoiseSchedule::from_betas(std::move(betas));
}

Mat random_simplex_table(int m, Rng rng) {
  Mat table(m + 1, m);
  for (int r = 0; r <= m; ++r) {
    double sum = 0.0;
    for (int c = 0; c < m; ++c) {
      table(r, c) = 0.05 + rng.next_double();
      sum += table(r, c);
    }
    table.row(r) /= sum;
  }
  return table;
}

}  // namespace

SuiteResult verify_matrix_algebra() {
  Checker check;
  Rng rng(2026);
  for (const int m : {2, 4, 8}) {
    for (const int T : {1, 4, 32}) {
      std::vector<NoiseSchedule> schedules;
      schedules.push_back(build_schedule(ScheduleKind::absorbing_uniform, T));
      schedules.push_back(build_schedule(ScheduleKind::linear, T));
      schedules.push_back(random_schedule(T, rng.stream(static_cast<std::uint64_t>(m * 100 + T))));
      for (std::size_t s = 0; s < schedules.size(); ++s) {
        const auto& sched = schedules[s];
        for (int i = 0; i <= T; ++i) {
          const Mat closed = cumulative_matrix(sched, i, m);
          const Mat product = cumulative_matrix_product(sched, i, m);
          std::ostringstream tag;
          tag << "m=" << m << " T=" << T << " sched=" << s << " i=" << i;
          check.expect((closed - product).cwiseAbs().maxCoeff() < 1e-12,
                       "closed form != product at " + tag.str());
          check.expect((closed.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12,
                       "row sums at " + tag.str());
          Vec e_m = Vec::Zero(m + 1);
          e_m[m] = 1.0;
          check.expect((closed.row(m).transpose().array() == e_m.array()).all(),
                       "mask row not exact at " + tag.str());
          check.expect((product.row(m).transpose().array() == e_m.array()).all(),
                       "product mask row not exact at " + tag.str());
        }
      }
    }
  }
  return check.finish("matrix-algebra");
}

SuiteResult verify_posterior() { return verify_posterior(PosteriorFn(&posterior)); }

SuiteResult verify_posterior(const PosteriorFn& fn) {
  Checker check;
  Rng rng(77);
  for (int m = 1; m <= 4; ++m) {
    for (int T = 1; T <= 4; ++T) {
      std::vector<NoiseSchedule> schedules;
      schedules.push_back(build_schedule(ScheduleKind::absorbing_uniform, T));
      schedules.push_back(random_schedule(T, rng.stream(static_cast<std::uint64_t>(m * 10 + T))));
      for (const auto& sched : schedules) {
        for (int i = 1; i <= T; ++i) {
          for (int j = 0; j < i; ++j) {
            for (TokenId x0 = 0; x0 < m; ++x0) {
              const CategoricalDist one_hot = CategoricalDist::one_hot(m + 1, x0);
              for (TokenId xt = 0; xt <= m; ++xt) {
                std::ostringstream tag;
                tag << "m=" << m << " T=" << T << " i=" << i << " j=" << j << " xt=" << xt
                    << " x0=" << x0;
                const CategoricalDist got = fn(xt, one_hot, sched, i, j, m);
                check.expect(std::abs(got.probs.sum() - 1.0) < 1e-12,
                             "posterior not normalized at " + tag.str());
                if (xt != m && xt != x0) {
                  // Unreachable observation: the absorbing-chain clamp pins
                  // the posterior to the observed token.
                  check.expect(got.probs[xt] == 1.0, "clamp at " + tag.str());
                  continue;
                }
                const CategoricalDist want = oracle::posterior_bayes(xt, one_hot, sched, i, j, m);
                check.expect(total_variation(got, want) < 1e-10,
                             "oracle mismatch at " + tag.str());
              }
            }
          }
        }
      }
    }
  }
  return check.finish("posterior-enumeration");
}

SuiteResult verify_nelbo() {
  Checker check;
  const int m = 2;
  const NoiseSchedule sched = build_schedule(ScheduleKind::absorbing_uniform, 2);
  IdMat x0(1, 1);

  Rng rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const TabularDenoiser denoiser(
        random_simplex_table(m, rng.stream(static_cast<std::uint64_t>(trial))));
    for (TokenId tok = 0; tok < m; ++tok) {
      x0(0, 0) = tok;
      const NelboBreakdown got = nelbo_terms(x0, denoiser, sched, 5, Expectation::exhaustive);
      got.validate();
      const NelboBreakdown want = oracle::nelbo_single_token(tok, denoiser, sched, m);
      std::ostringstream tag;
      tag << "trial=" << trial << " x0=" << tok;
      check.expect(std::abs(got.l_T - want.l_T) < 1e-8, "l_T at " + tag.str());
      check.expect(std::abs(got.l_0 - want.l_0) < 1e-8, "l_0 at " + tag.str());
      check.expect(got.l_mid.size() == want.l_mid.size() &&
                       std::abs(got.mid_sum() - want.mid_sum()) < 1e-8,
                   "l_mid at " + tag.str());
      check.expect(std::abs(got.total - want.total) < 1e-8, "total at " + tag.str());

      // Estimator averaged over every time index equals the sum it estimates.
      double averaged = 0.0;
      for (int i = 1; i <= sched.T(); ++i) {
        averaged += nelbo_detail::per_step_term(x0, denoiser, sched, i, 5,
                                                Expectation::exhaustive);
      }
      check.expect(std::abs(averaged - (got.total - got.l_T)) < 1e-8,
                   "estimator average at " + tag.str());

      // Bound property against the enumerated reverse-chain likelihood.
      const double exact_nll =
          -oracle::reverse_model_logprob_single_token(tok, denoiser, sched, m);
      check.expect(got.total >= exact_nll - 1e-9, "bound property at " + tag.str());
    }
  }

  // The oracle denoiser reproduces the true posterior everywhere, so every
  // learnable term must vanish exactly.
  IdMat grid(2, 3);
  grid << 0, 1, 0, 1, 1, 0;
  const NoiseSchedule sched4 = build_schedule(ScheduleKind::absorbing_uniform, 4);
  const OracleDenoiser oracle_dn(grid, m);
  const NelboBreakdown zero = nelbo_terms(grid, oracle_dn, sched4, 17, Expectation::sampled);
  check.expect(zero.l_0 == 0.0, "oracle denoiser l_0 not exactly 0");
  check.expect(zero.mid_sum() == 0.0, "oracle denoiser KL terms not exactly 0");
  check.expect(zero.l_T == 0.0, "absorbing schedule prior term not exactly 0");
  check.expect(zero.total == 0.0, "oracle denoiser total not exactly 0");
  return check.finish("nelbo-enumeration");
}

SuiteResult verify_gradients() {
  Checker check;
  const double eps = 1e-4;

  for (const bool attention : {false, true}) {
    ModelArch arch;
    arch.embed_dim = 10;
    arch.hidden_dim = 12;
    arch.attention = attention;
    arch.context = 6;

    const int m = 5;
    const NoiseSchedule sched = build_schedule(ScheduleKind::absorbing_uniform, 4);
    NetParams dn = init_denoiser_params(m, 6, arch, 301 + attention);
    // Move off initialization so the output head gradient is generic.
    Rng jitter(99);
    dn.for_each([&](const char*, Mat& mat) {
      for (Eigen::Index k = 0; k < mat.size(); ++k) {
        mat.data()[k] += 0.02 * (2.0 * jitter.next_double() - 1.0);
      }
    });
    IdMat x0(2, 6);
    x0 << 0, 1, 2, 3, 4, 0, 2, 2, 1, 0, 4, 3;
    const double dn_err = denoiser_grad_check(dn, x0, sched, 555, eps, 200);
    check.expect(dn_err < 1e-3,
                 "denoiser grad error " + std::to_string(dn_err) +
                     (attention ? " (attention)" : ""));

    NetParams arp = ar::init_ar_params(m + 2, arch, 401 + attention);
    arp.for_each([&](const char*, Mat& mat) {
      for (Eigen::Index k = 0; k < mat.size(); ++k) {
        mat.data()[k] += 0.02 * (2.0 * jitter.next_double() - 1.0);
      }
    });
    IdMat batch(2, 5);
    batch << 1, 2, 3, 4, 5, 6, 5, 4, 3, 2;
    const double ar_err = ar::ar_grad_check(arp, batch, 0, 777, eps, 200);
    check.expect(ar_err < 1e-3,
                 "ar grad error " + std::to_string(ar_err) +
                     (attention ? " (attention)" : ""));
  }
  return check.finish("gradient");
}

SuiteResult verify_metric_identities() {
  Checker check;

  check.expect(std::abs(bpc({std::log(0.5), std::log(0.5)}) - 1.0) < 1e-12,
               "bpc of coin flips");
  check.expect(bpc({0.0, 0.0, 0.0}) == 0.0, "bpc of certainty");
  check.expect(std::abs(bpc({std::log(0.5), std::log(0.25)}) - 1.5) < 1e-12,
               "bpc hand value");

  EvalReport uniform16;
  uniform16.nll = std::log(16.0);
  uniform16.bpt = uniform16.nll / std::log(2.0);
  uniform16.ppl = std::exp(uniform16.nll);
  uniform16.token_count = 1;
  uniform16.model_kind = "ar";
  uniform16.check_identities(1e-9);
  check.expect(std::abs(uniform16.bpt - 4.0) < 1e-12, "uniform-16 bpt");
  check.expect(std::abs(uniform16.ppl - 16.0) < 1e-9, "uniform-16 ppl");

  EvalReport perfect;
  perfect.nll = 0.0;
  perfect.bpt = 0.0;
  perfect.ppl = 1.0;
  perfect.token_count = 1;
  perfect.model_kind = "ar";
  perfect.check_identities(1e-9);
  check.expect(perfect.ppl == 1.0, "perfect scorer ppl");
  return check.finish("metric-identity");
}

SuiteResult verify_paper_tables() {
  Checker check;
  struct Row {
    const char* model;
    std::uint64_t seed;
    double bpt, nll, ppl;
  };
  // Transcribed reference rows: two scratch AR seeds, two GPT-2 seeds, three
  // D3PM seeds.
  const Row rows[] = {
      {"ar", 1, 4.5925, 3.1833, 24.126},     {"ar", 12, 4.6028, 3.1904, 24.2989},
      {"gpt2", 1000, 4.2546, 2.9491, 19.0886}, {"gpt2", 2000, 4.2548, 2.9492, 19.0905},
      {"d3pm", 1000, 9.0440, 6.2693, 528.1280}, {"d3pm", 2000, 5.7219, 3.9661, 52.7819},
      {"d3pm", 3000, 9.4063, 6.5199, 678.5501},
  };
  for (const auto& row : rows) {
    std::ostringstream tag;
    tag << row.model << "/" << row.seed;
    const double bpt_from_nll = row.nll / std::log(2.0);
    const double ppl_from_nll = std::exp(row.nll);
    check.expect(std::abs(row.bpt - bpt_from_nll) / bpt_from_nll < 1e-3,
                 "bpt identity for " + tag.str());
    check.expect(std::abs(row.ppl - ppl_from_nll) / ppl_from_nll < 1e-3,
                 "ppl identity for " + tag.str());
  }

  auto reports_for = [&](const char* model) {
    std::vector<EvalReport> reports;
    for (const auto& row : rows) {
      if (std::string_view(row.model) != model) continue;
      EvalReport r;
      r.model_kind = row.model;
      r.seed = row.seed;
      r.bpt = row.bpt;
      r.nll = row.nll;
      r.ppl = row.ppl;
      r.token_count = 1;
      reports.push_back(r);
    }
    return reports;
  };
  check.expect(std::abs(aggregate_seeds(reports_for("d3pm")).mean_bpt - 8.0574) < 1e-4,
               "d3pm mean bpt");
  check.expect(std::abs(aggregate_seeds(reports_for("ar")).mean_bpt - 4.59765) < 1e-4,
               "ar mean bpt");
  check.expect(std::abs(aggregate_seeds(reports_for("gpt2")).mean_bpt - 4.2547) < 1e-4,
               "gpt2 mean bpt");
  return check.finish("paper-table-consistency");
}

SuiteResult verify_forward_stats() {
  Checker check;
  // alpha_bar(1) = 0.5 exactly for the two-step uniform schedule.
  const NoiseSchedule sched = build_schedule(ScheduleKind::absorbing_uniform, 2);
  const int m = 4;
  const IdMat clean = IdMat::Zero(10, 10000);
  const NoisyState noisy = forward_sample(clean, sched, 1, m, 424242);
  const double masked =
      static_cast<double>((noisy.ids.array() == m).count()) / static_cast<double>(clean.size());
  check.expect(std::abs(masked - 0.5) <= 0.01,
               "masked fraction " + std::to_string(masked) + " outside 0.5 +- 0.01");
  return check.finish("forward-sample-statistics");
}

std::vector<SuiteResult> verify() {
  return {verify_matrix_algebra(), verify_posterior(),     verify_nelbo(),
          verify_gradients(),      verify_metric_identities(), verify_paper_tables(),
          verify_forward_stats()};
}

}  // namespace d3pmlab
