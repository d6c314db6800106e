#pragma once

// Central finite-difference oracle for model gradients (test-only).

#include "particle_em/models.hpp"

#include <algorithm>
#include <cmath>

namespace pem::testing {

/// |a - b| / max(1, |a|, |b|): relative for large values, absolute near zero.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

struct FdResult {
  double worst_theta = 0.0;
  double worst_z = 0.0;
};

/// Compares grad_theta and grad_z against central differences of log_joint
/// with step 1e-5 * (1 + |coordinate|).
inline FdResult check_gradients(const Model& model, const Vector& theta, const Vector& z) {
  FdResult r;
  const Vector gt = model.grad_theta(theta, z);
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double step = 1e-5 * (1.0 + std::abs(theta[k]));
    Vector tp = theta, tm = theta;
    tp[k] += step;
    tm[k] -= step;
    const double fd = (model.log_joint(tp, z) - model.log_joint(tm, z)) / (2.0 * step);
    r.worst_theta = std::max(r.worst_theta, rel_err(gt[k], fd));
  }
  const Vector gz = model.grad_z(theta, z);
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double step = 1e-5 * (1.0 + std::abs(z[k]));
    Vector zp = z, zm = z;
    zp[k] += step;
    zm[k] -= step;
    const double fd = (model.log_joint(theta, zp) - model.log_joint(theta, zm)) / (2.0 * step);
    r.worst_z = std::max(r.worst_z, rel_err(gz[k], fd));
  }
  return r;
}

}  // namespace pem::testing
