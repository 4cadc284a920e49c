#include "d3pmlab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace d3pmlab {
namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

}  // namespace

std::string hash_hex(std::uint64_t hash) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k) {
    out[static_cast<std::size_t>(k)] = digits[hash & 0xF];
    hash >>= 4;
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const NetParams& params) {
  nlohmann::ordered_json header;
  header["version"] = 1;
  header["kind"] = meta.kind;
  header["step"] = meta.step;
  header["vocab_hash"] = meta.vocab_hash;
  header["schedule_kind"] = meta.schedule_kind;
  header["T"] = meta.T;
  const auto& cfg = params.config;
  header["config"] = {{"vocab_in", cfg.vocab_in},
                      {"out_dim", cfg.out_dim},
                      {"max_positions", cfg.max_positions},
                      {"embed_dim", cfg.embed_dim},
                      {"hidden_dim", cfg.hidden_dim},
                      {"time_features", cfg.time_features},
                      {"attention", cfg.attention},
                      {"causal", cfg.causal}};
  auto& shapes = header["shapes"] = nlohmann::ordered_json::array();
  params.for_each([&](const char* name, const Mat& m) {
    shapes.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });

  std::string blob;
  const std::string header_text = header.dump();
  put_u64_le(blob, header_text.size());
  blob += header_text;
  params.for_each([&](const char*, const Mat& m) {
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const auto f = static_cast<float>(m.data()[k]);
      std::uint32_t bits = 0;
      std::memcpy(&bits, &f, sizeof(bits));
      put_u32_le(blob, bits);
    }
  });

  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::io_error, "cannot open " + path.string() + " for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  require(out.good(), Errc::io_error, "failed writing " + path.string());
}

std::pair<CheckpointMeta, NetParams> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io_error, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string blob = std::move(buf).str();
  require(blob.size() >= 8, Errc::io_error, "checkpoint truncated");
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  const std::uint64_t header_len = get_u64_le(bytes);
  require(blob.size() >= 8 + header_len, Errc::io_error, "checkpoint header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io_error, "invalid checkpoint header: " + std::string(e.what()));
  }
  require(header.at("version").get<int>() == 1, Errc::io_error,
          "unsupported checkpoint version");

  CheckpointMeta meta;
  meta.kind = header.at("kind").get<std::string>();
  meta.step = header.at("step").get<int>();
  meta.vocab_hash = header.at("vocab_hash").get<std::string>();
  meta.schedule_kind = header.at("schedule_kind").get<std::string>();
  meta.T = header.at("T").get<int>();

  NetConfig cfg;
  const auto& jc = header.at("config");
  cfg.vocab_in = jc.at("vocab_in").get<int>();
  cfg.out_dim = jc.at("out_dim").get<int>();
  cfg.max_positions = jc.at("max_positions").get<int>();
  cfg.embed_dim = jc.at("embed_dim").get<int>();
  cfg.hidden_dim = jc.at("hidden_dim").get<int>();
  cfg.time_features = jc.at("time_features").get<int>();
  cfg.attention = jc.at("attention").get<bool>();
  cfg.causal = jc.at("causal").get<bool>();

  NetParams params = NetParams::zeros_like(cfg);
  std::size_t offset = 8 + header_len;
  std::size_t shape_index = 0;
  const auto& shapes = header.at("shapes");
  params.for_each([&](const char* name, Mat& m) {
    require(shape_index < shapes.size(), Errc::io_error, "missing tensor in header");
    const auto& s = shapes[shape_index++];
    require(s.at("name").get<std::string>() == name &&
                s.at("rows").get<Eigen::Index>() == m.rows() &&
                s.at("cols").get<Eigen::Index>() == m.cols(),
            Errc::io_error, std::string("tensor shape mismatch for ") + name);
    const std::size_t bytes_needed = static_cast<std::size_t>(m.size()) * 4;
    require(offset + bytes_needed <= blob.size(), Errc::io_error, "checkpoint data truncated");
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const std::uint32_t bits =
          get_u32_le(reinterpret_cast<const unsigned char*>(blob.data()) + offset + 4 * k);
      float f = 0.0f;
      std::memcpy(&f, &bits, sizeof(f));
      m.data()[k] = static_cast<double>(f);
    }
    offset += bytes_needed;
  });
  require(offset == blob.size(), Errc::io_error, "trailing bytes in checkpoint");
  return {std::move(meta), std::move(params)};
}

}  // namespace d3pmlab
