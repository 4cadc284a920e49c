#include "d3pmlab/schedule.hpp"

namespace d3pmlab {

const char* schedule_kind_str(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::absorbing_uniform: return "absorbing-uniform";
    case ScheduleKind::linear: return "linear";
  }
  return "?";
}

ScheduleKind schedule_kind_from_str(const std::string& s) {
  if (s == "absorbing-uniform") return ScheduleKind::absorbing_uniform;
  if (s == "linear") return ScheduleKind::linear;
  fail(Errc::bad_config, "unknown schedule kind: " + s);
}

NoiseSchedule NoiseSchedule::build(ScheduleKind kind, int steps) {
  require(steps >= 1, Errc::bad_t, "schedule needs T >= 1");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  const double T = steps;
  for (int i = 1; i <= steps; ++i) {
    switch (kind) {
      case ScheduleKind::absorbing_uniform:
        betas[i - 1] = 1.0 / (T - i + 1);
        break;
      case ScheduleKind::linear:
        betas[i - 1] = static_cast<double>(i) / T;
        break;
    }
  }
  betas.back() = 1.0;  // full masking at the final step

  NoiseSchedule sched = from_betas(std::move(betas));
  if (kind == ScheduleKind::absorbing_uniform) {
    // The telescoping product has the exact closed form 1 - i/T; pin it to
    // kill accumulated rounding.
    for (int i = 0; i <= steps; ++i) {
      sched.alpha_bar_[static_cast<std::size_t>(i)] = 1.0 - static_cast<double>(i) / T;
    }
  }
  require(sched.fully_masking() && sched.alpha_bar(steps) <= 1e-8, Errc::bad_t,
          "schedule does not mask fully at T");
  return sched;
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  require(!betas.empty(), Errc::bad_t, "schedule needs T >= 1");
  NoiseSchedule sched;
  sched.alpha_bar_.resize(betas.size() + 1);
  sched.alpha_bar_[0] = 1.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    require(betas[i] > 0.0 && betas[i] <= 1.0, Errc::bad_beta,
            "beta must lie in (0, 1]");
    sched.alpha_bar_[i + 1] = sched.alpha_bar_[i] * (1.0 - betas[i]);
    require(sched.alpha_bar_[i + 1] < sched.alpha_bar_[i], Errc::bad_beta,
            "retention must be strictly decreasing");
  }
  sched.beta_ = std::move(betas);
  return sched;
}

double NoiseSchedule::beta(int i) const {
  require(i >= 1 && i <= T(), Errc::index_out_of_range,
          "beta index " + std::to_string(i) + " outside [1, T]");
  return beta_[static_cast<std::size_t>(i - 1)];
}

double NoiseSchedule::alpha_bar(int i) const {
  require(i >= 0 && i <= T(), Errc::index_out_of_range,
          "alpha_bar index " + std::to_string(i) + " outside [0, T]");
  return alpha_bar_[static_cast<std::size_t>(i)];
}

NoiseSchedule build_schedule(ScheduleKind kind, int steps) {
  return NoiseSchedule::build(kind, steps);
}

}  // namespace d3pmlab
