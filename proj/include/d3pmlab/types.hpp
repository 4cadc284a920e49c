#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "d3pmlab/error.hpp"

namespace d3pmlab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Token-id grid, rows are sequences. Values live in [0, m] where m is the
// mask index (= vocab size).
using IdMat = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;

using TokenId = std::int32_t;

// Probability vector on the simplex. Sum-to-one is validated where the
// contract demands it rather than on every construction.
struct CategoricalDist {
  Vec probs;

  CategoricalDist() = default;
  explicit CategoricalDist(Vec p) : probs(std::move(p)) {}

  static CategoricalDist uniform(Eigen::Index n) {
    return CategoricalDist(Vec::Constant(n, 1.0 / static_cast<double>(n)));
  }
  static CategoricalDist one_hot(Eigen::Index n, Eigen::Index k) {
    Vec p = Vec::Zero(n);
    p[k] = 1.0;
    return CategoricalDist(std::move(p));
  }

  Eigen::Index size() const { return probs.size(); }
  double operator[](Eigen::Index k) const { return probs[k]; }

  bool is_distribution(double tol = 1e-12) const {
    return probs.size() > 0 && probs.minCoeff() >= -tol &&
           std::abs(probs.sum() - 1.0) <= tol;
  }
  void check(double tol = 1e-12) const {
    require(is_distribution(tol), Errc::shape_mismatch,
            "vector is not a probability distribution");
  }
};

// Total variation distance, 0.5 * L1.
inline double total_variation(const CategoricalDist& a, const CategoricalDist& b) {
  return 0.5 * (a.probs - b.probs).cwiseAbs().sum();
}

}  // namespace d3pmlab
