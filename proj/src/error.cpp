#include "d3pmlab/error.hpp"

namespace d3pmlab {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::missing_split: return "MissingSplit";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::encoding_error: return "EncodingError";
    case Errc::too_short: return "TooShort";
    case Errc::mask_in_output: return "MaskInOutput";
    case Errc::unknown_id: return "UnknownId";
    case Errc::bad_t: return "BadT";
    case Errc::bad_beta: return "BadBeta";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::mask_as_clean: return "MaskAsClean";
    case Errc::bad_times: return "BadTimes";
    case Errc::denoiser_mass_on_mask: return "DenoiserMassOnMask";
    case Errc::support_mismatch: return "SupportMismatch";
    case Errc::empty_input: return "EmptyInput";
    case Errc::mixed_kinds: return "MixedKinds";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::empty_prefix: return "EmptyPrefix";
    case Errc::bad_config: return "ConfigError";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace d3pmlab
