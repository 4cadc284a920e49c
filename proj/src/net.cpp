#include "d3pmlab/net.hpp"

#include <cmath>
#include <set>

namespace d3pmlab {

void NetConfig::validate() const {
  require(vocab_in >= 1 && out_dim >= 1 && max_positions >= 1, Errc::shape_mismatch,
          "net config has empty dimensions");
  require(embed_dim >= 1 && hidden_dim >= 1, Errc::shape_mismatch,
          "net config has empty layers");
  require(time_features % 2 == 0, Errc::shape_mismatch,
          "time features come in sin/cos pairs");
}

NetParams NetParams::init(const NetConfig& config, std::uint64_t seed) {
  config.validate();
  NetParams p = zeros_like(config);
  Rng base = Rng(seed).stream("net_init");
  const double scale = 0.05;
  auto fill_uniform = [&](const char* name, Mat& m) {
    Rng rng = base.stream(name);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        m(r, c) = scale * (2.0 * rng.next_double() - 1.0);
      }
    }
  };
  fill_uniform("tok_emb", p.tok_emb);
  fill_uniform("pos_emb", p.pos_emb);
  fill_uniform("time_w", p.time_w);
  fill_uniform("wq", p.wq);
  fill_uniform("wk", p.wk);
  fill_uniform("wv", p.wv);
  fill_uniform("w1", p.w1);
  // b1, w2, b2 stay zero: zero logits make the untrained head exactly uniform.
  p.round_to_f32();
  return p;
}

NetParams NetParams::zeros_like(const NetConfig& config) {
  NetParams p;
  p.config = config;
  const int e = config.embed_dim;
  p.tok_emb = Mat::Zero(config.vocab_in, e);
  p.pos_emb = Mat::Zero(config.max_positions, e);
  p.time_w = Mat::Zero(config.time_features, e);
  if (config.attention) {
    p.wq = Mat::Zero(e, e);
    p.wk = Mat::Zero(e, e);
    p.wv = Mat::Zero(e, e);
  }
  p.w1 = Mat::Zero(e, config.hidden_dim);
  p.b1 = Mat::Zero(config.hidden_dim, 1);
  p.w2 = Mat::Zero(config.hidden_dim, config.out_dim);
  p.b2 = Mat::Zero(config.out_dim, 1);
  return p;
}

std::int64_t NetParams::param_count() const {
  std::int64_t total = 0;
  for_each([&](const char*, const Mat& m) { total += m.size(); });
  return total;
}

double NetParams::get_flat(std::int64_t index) const {
  double value = 0.0;
  std::int64_t offset = 0;
  for_each([&](const char*, const Mat& m) {
    if (index >= offset && index < offset + m.size()) {
      value = m.data()[index - offset];
    }
    offset += m.size();
  });
  require(index >= 0 && index < offset, Errc::index_out_of_range, "flat parameter index");
  return value;
}

void NetParams::set_flat(std::int64_t index, double value) {
  std::int64_t offset = 0;
  bool done = false;
  for_each([&](const char*, Mat& m) {
    if (index >= offset && index < offset + m.size()) {
      m.data()[index - offset] = value;
      done = true;
    }
    offset += m.size();
  });
  require(done, Errc::index_out_of_range, "flat parameter index");
}

void NetParams::round_to_f32() {
  for_each([](const char*, Mat& m) {
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      m.data()[k] = static_cast<double>(static_cast<float>(m.data()[k]));
    }
  });
}

void NetParams::axpy(double scale, const NetParams& other) {
  std::vector<Mat*> mine;
  for_each([&](const char*, Mat& m) { mine.push_back(&m); });
  std::size_t k = 0;
  other.for_each([&](const char*, const Mat& om) {
    if (om.size() > 0) *mine[k] += scale * om;
    ++k;
  });
}

Eigen::RowVectorXd time_feature_row(int count, double time) {
  Eigen::RowVectorXd feat(count);
  for (int k = 0; k < count / 2; ++k) {
    const double angle = M_PI * std::ldexp(time, k);  // pi * 2^k * t
    feat[2 * k] = std::sin(angle);
    feat[2 * k + 1] = std::cos(angle);
  }
  return feat;
}

void softmax_rows_inplace(Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double peak = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - peak).exp();
    m.row(r) /= m.row(r).sum();
  }
}

namespace {

constexpr double kNegInf = -1e30;

void apply_attention(const NetParams& params, ForwardCache& cache) {
  const auto& cfg = params.config;
  const int s = cache.seq_len;
  const Eigen::Index n = cache.x_pre.rows();
  require(s >= 1 && n % s == 0, Errc::shape_mismatch,
          "attention input is not a whole number of groups");
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
  cache.x = cache.x_pre;
  const Eigen::Index groups = n / s;
  cache.attn_q.resize(static_cast<std::size_t>(groups));
  cache.attn_k.resize(static_cast<std::size_t>(groups));
  cache.attn_v.resize(static_cast<std::size_t>(groups));
  cache.attn_a.resize(static_cast<std::size_t>(groups));
  for (Eigen::Index g = 0; g < groups; ++g) {
    const auto block = cache.x_pre.middleRows(g * s, s);
    Mat q = block * params.wq;
    Mat k = block * params.wk;
    Mat v = block * params.wv;
    Mat scores = q * k.transpose() * inv_scale;
    if (cfg.causal) {
      for (int r = 0; r < s; ++r) {
        for (int c = r + 1; c < s; ++c) scores(r, c) = kNegInf;
      }
    }
    softmax_rows_inplace(scores);
    cache.x.middleRows(g * s, s) += scores * v;
    const auto gi = static_cast<std::size_t>(g);
    cache.attn_q[gi] = std::move(q);
    cache.attn_k[gi] = std::move(k);
    cache.attn_v[gi] = std::move(v);
    cache.attn_a[gi] = std::move(scores);
  }
}

}  // namespace

ForwardCache net_forward(const NetParams& params, std::vector<TokenId> ids,
                         std::vector<int> pos, int seq_len, double time) {
  const auto& cfg = params.config;
  require(ids.size() == pos.size() && !ids.empty(), Errc::shape_mismatch,
          "ids and positions must align");
  const auto n = static_cast<Eigen::Index>(ids.size());

  ForwardCache cache;
  cache.ids = std::move(ids);
  cache.pos = std::move(pos);
  cache.seq_len = seq_len;

  cache.x_pre.resize(n, cfg.embed_dim);
  for (Eigen::Index r = 0; r < n; ++r) {
    const TokenId id = cache.ids[static_cast<std::size_t>(r)];
    const int p = cache.pos[static_cast<std::size_t>(r)];
    require(id >= 0 && id < cfg.vocab_in, Errc::shape_mismatch, "token id out of range");
    require(p >= 0 && p < cfg.max_positions, Errc::shape_mismatch,
            "position index out of range");
    cache.x_pre.row(r) = params.tok_emb.row(id) + params.pos_emb.row(p);
  }
  if (cfg.time_features > 0) {
    require(time >= 0.0 && time <= 1.0, Errc::shape_mismatch,
            "time must lie in [0, 1]");
    cache.time_feat = time_feature_row(cfg.time_features, time);
    cache.x_pre.rowwise() += cache.time_feat * params.time_w;
  }

  if (cfg.attention) {
    apply_attention(params, cache);
  } else {
    cache.x = cache.x_pre;
  }

  cache.hidden = ((cache.x * params.w1).rowwise() + params.b1.col(0).transpose())
                     .array()
                     .tanh();
  cache.logits = (cache.hidden * params.w2).rowwise() + params.b2.col(0).transpose();
  cache.probs = cache.logits;
  softmax_rows_inplace(cache.probs);
  return cache;
}

NetParams net_backward(const NetParams& params, const ForwardCache& cache,
                       const Mat& d_logits) {
  const auto& cfg = params.config;
  require(d_logits.rows() == cache.logits.rows() && d_logits.cols() == cfg.out_dim,
          Errc::shape_mismatch, "logit gradient shape");
  NetParams grads = NetParams::zeros_like(cfg);

  grads.w2 = cache.hidden.transpose() * d_logits;
  grads.b2 = d_logits.colwise().sum().transpose();
  Mat d_hidden = d_logits * params.w2.transpose();
  Mat d_pre = d_hidden.array() * (1.0 - cache.hidden.array().square());
  grads.w1 = cache.x.transpose() * d_pre;
  grads.b1 = d_pre.colwise().sum().transpose();
  Mat d_x = d_pre * params.w1.transpose();

  Mat d_x_pre;
  if (cfg.attention) {
    const int s = cache.seq_len;
    const Eigen::Index groups = cache.x_pre.rows() / s;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
    d_x_pre = d_x;  // residual branch
    for (Eigen::Index g = 0; g < groups; ++g) {
      const auto gi = static_cast<std::size_t>(g);
      const auto h = cache.x_pre.middleRows(g * s, s);
      const Mat& a = cache.attn_a[gi];
      const auto d_out = d_x.middleRows(g * s, s);
      Mat d_a = d_out * cache.attn_v[gi].transpose();
      Mat d_v = a.transpose() * d_out;
      Mat d_scores(s, s);
      for (int r = 0; r < s; ++r) {
        const double dot = d_a.row(r).dot(a.row(r));
        d_scores.row(r) = (d_a.row(r).array() - dot) * a.row(r).array();
      }
      Mat d_q = d_scores * cache.attn_k[gi] * inv_scale;
      Mat d_k = d_scores.transpose() * cache.attn_q[gi] * inv_scale;
      d_x_pre.middleRows(g * s, s) += d_q * params.wq.transpose() +
                                      d_k * params.wk.transpose() +
                                      d_v * params.wv.transpose();
      grads.wq += h.transpose() * d_q;
      grads.wk += h.transpose() * d_k;
      grads.wv += h.transpose() * d_v;
    }
  } else {
    d_x_pre = std::move(d_x);
  }

  for (Eigen::Index r = 0; r < d_x_pre.rows(); ++r) {
    grads.tok_emb.row(cache.ids[static_cast<std::size_t>(r)]) += d_x_pre.row(r);
    grads.pos_emb.row(cache.pos[static_cast<std::size_t>(r)]) += d_x_pre.row(r);
  }
  if (cfg.time_features > 0) {
    grads.time_w = cache.time_feat.transpose() * d_x_pre.colwise().sum();
  }
  return grads;
}

double grad_check_core(NetParams& params, const std::function<double(const NetParams&)>& loss,
                       const NetParams& analytic, Rng rng, int max_params, double epsilon) {
  require(epsilon >= 1e-6 && epsilon <= 1e-3, Errc::bad_config,
          "finite-difference step outside [1e-6, 1e-3]");
  const std::int64_t total = params.param_count();
  std::set<std::int64_t> indices;
  if (total <= max_params) {
    for (std::int64_t k = 0; k < total; ++k) indices.insert(k);
  } else {
    while (static_cast<int>(indices.size()) < max_params) {
      indices.insert(static_cast<std::int64_t>(rng.uniform_u64(static_cast<std::uint64_t>(total))));
    }
  }
  double worst = 0.0;
  for (const std::int64_t idx : indices) {
    const double saved = params.get_flat(idx);
    params.set_flat(idx, saved + epsilon);
    const double up = loss(params);
    params.set_flat(idx, saved - epsilon);
    const double down = loss(params);
    params.set_flat(idx, saved);
    const double numeric = (up - down) / (2.0 * epsilon);
    const double exact = analytic.get_flat(idx);
    const double scale = std::max({std::abs(numeric), std::abs(exact), 1e-6});
    worst = std::max(worst, std::abs(numeric - exact) / scale);
  }
  return worst;
}

}  // namespace d3pmlab
