#include "gpgmm/gp_kernel.hpp"

#include <cmath>

namespace gpgmm {

namespace {
constexpr double kSqrt3 = 1.7320508075688772935;
}

void KernelParams::validate() const {
    if (!(length_scale > 0.0)) throw ArgumentError("length scale must be > 0");
    if (!(value_noise > 0.0)) throw ArgumentError("value noise must be > 0");
    if (!(gradient_noise > 0.0)) throw ArgumentError("gradient noise must be > 0");
}

double matern32(const Vec3 &x, const Vec3 &xp, double scale, double scale_p, double length_scale) {
    const double a = kSqrt3 * (x - xp).norm() / length_scale;
    return scale * scale_p * (1.0 + a) * std::exp(-a);
}

Mat4 joint_kernel_block(const Vec3 &x, const Vec3 &xp, double scale, double scale_p, double length_scale) {
    const Vec3 d = x - xp;
    const double r = d.norm();
    const double a = kSqrt3 / length_scale;
    const double s = scale * scale_p;
    const double e = std::exp(-a * r);
    const double c = s * a * a * e;  // s (3 / l^2) exp(-sqrt(3) r / l)

    Mat4 k;
    k(0, 0) = s * (1.0 + a * r) * e;
    // cov(f(x), df(x')/dx'_j) = dk/dx'_j = c (x - x')_j
    k.block<1, 3>(0, 1) = c * d.transpose();
    // cov(df(x)/dx_i, f(x')) = dk/dx_i = c (x' - x)_i
    k.block<3, 1>(1, 0) = -c * d;
    // d2k / dx_i dx'_j = c (delta_ij - a d_i d_j / r); the second term vanishes as r -> 0.
    Mat3 h = c * Mat3::Identity();
    if (r > 0.0) h.noalias() -= (c * a / r) * d * d.transpose();
    k.block<3, 3>(1, 1) = h;
    return k;
}

}  // namespace gpgmm
