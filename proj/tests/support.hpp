#ifndef RESCALE_TESTS_SUPPORT_HPP
#define RESCALE_TESTS_SUPPORT_HPP

#include "rescale/types.hpp"

#include <algorithm>
#include <cmath>

namespace rescale::testing {

// Built independently of the library generators.
inline Matrix spd(Index n, Rng& rng, double shift = 0.1) {
  const Matrix G = random_normal_matrix(n, n, rng);
  return G * G.transpose() + shift * Matrix::Identity(n, n);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double det(const Matrix& m) { return m.fullPivLu().determinant(); }

struct ValidUpdate {
  Matrix H;
  Vector g;
  Vector g_plus;
  Vector s;
  Vector y;
};

// Random H, g and g_plus with s = -H g and s^T y > 0.
inline ValidUpdate valid_update(Index n, Rng& rng) {
  ValidUpdate u;
  u.H = spd(n, rng);
  u.g = random_normal_vector(n, rng);
  u.s = -(u.H * u.g);
  u.y = random_normal_vector(n, rng);
  if (u.s.dot(u.y) < 0.0) u.y = -u.y;
  u.y += 0.1 * u.s / u.s.norm() * u.y.norm();
  u.g_plus = u.g + u.y;
  return u;
}

}  // namespace rescale::testing

#endif  // RESCALE_TESTS_SUPPORT_HPP
