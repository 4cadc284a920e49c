#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "d3pmlab/checkpoint.hpp"
#include "d3pmlab/denoiser.hpp"
#include "d3pmlab/net.hpp"

using namespace d3pmlab;

namespace {

ModelArch small_arch(bool attention = false) {
  ModelArch arch;
  arch.embed_dim = 8;
  arch.hidden_dim = 10;
  arch.attention = attention;
  arch.context = 6;
  return arch;
}

IdMat small_batch() {
  IdMat x0(2, 6);
  x0 << 0, 1, 2, 3, 4, 0, 2, 2, 1, 0, 4, 3;
  return x0;
}

}  // namespace

TEST_CASE("initialization is deterministic and float-representable") {
  const NetParams a = init_denoiser_params(5, 6, small_arch(), 42);
  const NetParams b = init_denoiser_params(5, 6, small_arch(), 42);
  bool equal = true;
  a.for_each([&](const char* name, const Mat& ma) {
    b.for_each([&](const char* nb, const Mat& mb) {
      if (std::string_view(name) == nb && ma.size() > 0) {
        equal = equal && (ma.array() == mb.array()).all();
      }
    });
  });
  CHECK(equal);
  NetParams rounded = a;
  rounded.round_to_f32();
  rounded.for_each([&](const char*, const Mat& m) {
    a.for_each([&](const char*, const Mat&) {});
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      CHECK(m.data()[k] == static_cast<double>(static_cast<float>(m.data()[k])));
    }
  });
  CHECK(a.tok_emb.cwiseAbs().maxCoeff() <= 0.05);
  CHECK(a.w2.isZero(0.0));
  CHECK(a.b2.isZero(0.0));
}

TEST_CASE("untrained output is exactly uniform") {
  const int m = 5;
  const NetParams params = init_denoiser_params(m, 6, small_arch(), 7);
  const NeuralDenoiser dn(params);
  const IdMat all_mask = IdMat::Constant(2, 6, m);
  const Mat probs = dn.denoise(all_mask, 1.0);
  CHECK(probs.rows() == 12);
  CHECK((probs.array() - 1.0 / m).abs().maxCoeff() < 1e-15);
  // within 10x of 1/m, trivially
  CHECK((probs.array() > 0.1 / m).all());
  CHECK((probs.array() < 10.0 / m).all());
}

TEST_CASE("denoise is deterministic and simplex-valued") {
  NetParams params = init_denoiser_params(4, 5, small_arch(true), 11);
  Rng jitter(1);
  params.for_each([&](const char*, Mat& mat) {
    for (Eigen::Index k = 0; k < mat.size(); ++k) {
      mat.data()[k] += 0.3 * (2.0 * jitter.next_double() - 1.0);
    }
  });
  const NeuralDenoiser dn(params);
  IdMat noisy(2, 5);
  noisy << 0, 4, 2, 4, 1, 4, 4, 4, 0, 3;
  const Mat a = dn.denoise(noisy, 0.5);
  const Mat b = dn.denoise(noisy, 0.5);
  CHECK((a.array() == b.array()).all());
  CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
  CHECK(a.minCoeff() > 0.0);

  const Mat later = dn.denoise(noisy, 0.9);
  CHECK((a - later).cwiseAbs().maxCoeff() > 0.0);  // time conditioning is live
}

TEST_CASE("sequences longer than the positional table are rejected") {
  const NetParams params = init_denoiser_params(4, 5, small_arch(), 3);
  const NeuralDenoiser dn(params);
  const IdMat too_long = IdMat::Constant(1, 9, 4);
  CHECK_THROWS_AS(dn.denoise(too_long, 0.5), Error);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  ModelArch arch = small_arch(true);
  NetParams params = init_denoiser_params(6, 6, arch, 99);
  CheckpointMeta meta;
  meta.kind = "d3pm";
  meta.step = 1234;
  meta.vocab_hash = hash_hex(0xDEADBEEFCAFEBABEull);
  meta.schedule_kind = "absorbing-uniform";
  meta.T = 50;
  const auto path = std::filesystem::temp_directory_path() / "d3pmlab_ckpt_test.bin";
  save_checkpoint(path, meta, params);
  auto [loaded_meta, loaded] = load_checkpoint(path);
  CHECK(loaded_meta.kind == meta.kind);
  CHECK(loaded_meta.step == meta.step);
  CHECK(loaded_meta.vocab_hash == meta.vocab_hash);
  CHECK(loaded_meta.schedule_kind == meta.schedule_kind);
  CHECK(loaded_meta.T == meta.T);

  const NeuralDenoiser before(params);
  const NeuralDenoiser after(loaded);
  const IdMat noisy = IdMat::Constant(2, 6, 6);
  const Mat pa = before.denoise(noisy, 0.25);
  const Mat pb = after.denoise(noisy, 0.25);
  CHECK((pa.array() == pb.array()).all());
  std::filesystem::remove(path);
}

TEST_CASE("flat parameter indexing covers every tensor") {
  NetParams params = init_denoiser_params(3, 4, small_arch(true), 5);
  const std::int64_t total = params.param_count();
  CHECK(total > 0);
  const double before = params.get_flat(total - 1);
  params.set_flat(total - 1, before + 1.0);
  CHECK(params.get_flat(total - 1) == before + 1.0);
  CHECK_THROWS_AS(params.get_flat(total), Error);
}

TEST_CASE("gradient check passes on randomized instances") {
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 4);
  for (const bool attention : {false, true}) {
    NetParams params = init_denoiser_params(5, 6, small_arch(attention), 301);
    Rng jitter(99);
    params.for_each([&](const char*, Mat& mat) {
      for (Eigen::Index k = 0; k < mat.size(); ++k) {
        mat.data()[k] += 0.02 * (2.0 * jitter.next_double() - 1.0);
      }
    });
    const double err = denoiser_grad_check(params, small_batch(), s, 555, 1e-4, 200);
    CHECK(err < 1e-3);
    // determinism of the check itself
    CHECK(denoiser_grad_check(params, small_batch(), s, 555, 1e-4, 50) ==
          denoiser_grad_check(params, small_batch(), s, 555, 1e-4, 50));
  }
}

TEST_CASE("unused embedding rows have zero analytic and numeric gradients") {
  const NoiseSchedule s = build_schedule(ScheduleKind::absorbing_uniform, 4);
  const int m = 8;
  NetParams params = init_denoiser_params(m, 4, small_arch(), 21);
  IdMat x0(1, 4);
  x0 << 0, 1, 0, 1;  // tokens 2..7 never appear, masked or not
  const std::uint64_t seed = 9;
  const NetParams grads = denoiser_loss_grads(params, x0, s, seed).second;
  CHECK(grads.tok_emb.row(5).isZero(0.0));

  // Numeric derivative along an unused coordinate: tok_emb is the first
  // tensor, column-major, so row 5 column 0 sits at flat index 5.
  NetParams work = params;
  const std::int64_t idx = 5;
  const double base = work.get_flat(idx);
  work.set_flat(idx, base + 1e-4);
  const double up = denoiser_loss_grads(work, x0, s, seed).first;
  work.set_flat(idx, base - 1e-4);
  const double down = denoiser_loss_grads(work, x0, s, seed).first;
  CHECK(std::abs((up - down) / 2e-4) < 1e-8);
}

TEST_CASE("sgd driver enforces finite losses") {
  TrainConfig config;
  config.steps = 3;
  config.lr = 1.0;
  config.warmup = 0;
  config.batch_size = 1;
  config.seq_len = 4;
  CorpusSplit split{SplitName::train, {"abcdabcdabcd"}};
  Tokenizer tok;
  tok.vocab = Vocab::from_tokens({"a", "b", "c", "d"});
  tok.rebuild_ranks();
  BatchStream stream(split, tok, 1, 4, 1);
  NetParams params = init_denoiser_params(7, 4, small_arch(), 1);
  try {
    run_sgd(params, config, stream,
            [&](const NetParams& p, const IdMat&, int) {
              return std::pair<double, NetParams>(
                  std::numeric_limits<double>::quiet_NaN(), NetParams::zeros_like(p.config));
            });
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_finite_loss);
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("warmup schedule interpolates linearly then holds") {
  CHECK(lr_at(3e-4, 100, 50) == doctest::Approx(1.5e-4).epsilon(1e-12));
  CHECK(lr_at(3e-4, 100, 100) == doctest::Approx(3e-4).epsilon(1e-12));
  CHECK(lr_at(3e-4, 100, 5000) == doctest::Approx(3e-4).epsilon(1e-12));
  CHECK(lr_at(3e-4, 0, 1) == doctest::Approx(3e-4).epsilon(1e-12));
}
