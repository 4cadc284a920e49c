#pragma once

#include <stdexcept>
#include <string>

namespace d3pmlab {

enum class Errc {
  missing_split,
  empty_corpus,
  encoding_error,
  too_short,
  mask_in_output,
  unknown_id,
  bad_t,
  bad_beta,
  index_out_of_range,
  mask_as_clean,
  bad_times,
  denoiser_mass_on_mask,
  support_mismatch,
  empty_input,
  mixed_kinds,
  shape_mismatch,
  non_finite_loss,
  empty_prefix,
  bad_config,
  io_error,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace d3pmlab
