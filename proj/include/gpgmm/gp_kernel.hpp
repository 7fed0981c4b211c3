#pragma once

#include "gpgmm/common.hpp"

namespace gpgmm {

struct KernelParams {
    double length_scale = 0.3;   // l, meters
    double value_noise = 0.01;   // sigma_eta, meters
    double gradient_noise = 0.1; // sigma_eta for normal observations, unitless

    void validate() const;
};

/// Matern-3/2 kernel with per-input signal scales:
/// s s' (1 + sqrt(3) r / l) exp(-sqrt(3) r / l).
double matern32(const Vec3 &x, const Vec3 &xp, double scale, double scale_p, double length_scale);

/// Joint covariance of (f(x), grad f(x)) with (f(x'), grad f(x')), rows and
/// columns ordered (value, d/dx, d/dy, d/dz). The signal scales are treated
/// as constants under differentiation.
Mat4 joint_kernel_block(const Vec3 &x, const Vec3 &xp, double scale, double scale_p, double length_scale);

}  // namespace gpgmm
