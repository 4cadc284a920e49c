#pragma once

#include <string>
#include <vector>

#include "d3pmlab/types.hpp"

namespace d3pmlab {

enum class ScheduleKind { absorbing_uniform, linear };

const char* schedule_kind_str(ScheduleKind kind);
ScheduleKind schedule_kind_from_str(const std::string& s);

// T-step masking schedule on the unit time interval. alpha_bar(i) is the
// probability that a token is still unmasked after i forward steps:
// alpha_bar(i) = prod_{j<=i} (1 - beta_j), alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  // absorbing-uniform: beta_i = 1/(T-i+1), so alpha_bar(i) = 1 - i/T exactly.
  // linear: beta_i = i/T with beta_T clamped to 1.
  // Either way alpha_bar(T) == 0: the forward process ends fully masked.
  static NoiseSchedule build(ScheduleKind kind, int steps);

  // Arbitrary beta values in (0, 1]; alpha_bar must be strictly decreasing
  // but full masking at T is not required. Used for algebra tests and
  // custom chains; the NELBO rejects non-absorbing schedules at its prior
  // term instead.
  static NoiseSchedule from_betas(std::vector<double> betas);

  int T() const { return static_cast<int>(beta_.size()); }
  double beta(int i) const;       // i in [1, T]
  double alpha_bar(int i) const;  // i in [0, T]
  double s_time(int i) const { return static_cast<double>(i - 1) / T(); }
  double t_time(int i) const { return static_cast<double>(i) / T(); }
  bool fully_masking() const { return alpha_bar(T()) == 0.0; }

 private:
  NoiseSchedule() = default;
  std::vector<double> beta_;       // beta_1..beta_T
  std::vector<double> alpha_bar_;  // alpha_bar_0..alpha_bar_T
};

NoiseSchedule build_schedule(ScheduleKind kind, int steps);

}  // namespace d3pmlab
