#pragma once

#include <functional>
#include <vector>

#include "lmp/rng.hpp"
#include "lmp/rotation.hpp"
#include "lmp/tape.hpp"

namespace lmp::testing {

inline Mat3 random_rotation(Rng& rng) {
  const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  const double angle = rng.uniform(-M_PI, M_PI);
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

// Max relative error between reverse-mode and central finite-difference
// gradients of a scalar-valued builder over the given leaf inputs.
inline double grad_check(
    const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& build,
    std::vector<ad::Mat> inputs, double step = 1e-6) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& x : inputs) leaves.push_back(tape.leaf(x));
  ad::Var loss = build(tape, leaves);
  tape.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const ad::Mat& g = leaves[k].grad();
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double v) {
        std::vector<ad::Mat> shifted = inputs;
        shifted[k](i) = v;
        ad::Tape t2;
        std::vector<ad::Var> l2;
        for (const auto& x : shifted) l2.push_back(t2.leaf(x));
        return build(t2, l2).scalar();
      };
      const double x0 = inputs[k](i);
      const double fd = (eval(x0 + step) - eval(x0 - step)) / (2.0 * step);
      const double ad_g = g.size() == 0 ? 0.0 : g(i);
      const double denom = std::max({1e-8, std::abs(fd), std::abs(ad_g)});
      worst = std::max(worst, std::abs(fd - ad_g) / denom);
    }
  }
  return worst;
}

}  // namespace lmp::testing
