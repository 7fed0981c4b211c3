// Independent reference computations used by the tests. Nothing here calls
// the library's numerical routines; everything is re-derived in long double.
#pragma once

#include <gpgmm/common.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

using LD = long double;
using LMat = std::vector<std::vector<LD>>;
using LVec = std::vector<LD>;

/// Gaussian elimination with partial pivoting.
inline LVec solve(LMat a, LVec b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
        }
        std::swap(a[c], a[p]);
        std::swap(b[c], b[p]);
        if (a[c][c] == 0) throw std::runtime_error("singular oracle system");
        for (std::size_t r = c + 1; r < n; ++r) {
            const LD f = a[r][c] / a[c][c];
            if (f == 0) continue;
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    LVec x(n);
    for (std::size_t i = n; i-- > 0;) {
        LD s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

inline LD dot(const LVec &a, const LVec &b) {
    LD s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Radial profile f(r) = s (1 + a r) exp(-a r) of the Matern 3/2 kernel and
/// its first two derivatives in r.
struct Profile {
    LD f, f1, f2;
};

inline Profile matern_profile(LD r, LD s, LD l) {
    const LD a = std::sqrt(3.0L) / l;
    const LD e = std::exp(-a * r);
    return {s * (1 + a * r) * e, -s * a * a * r * e, s * a * a * e * (a * r - 1)};
}

/// Covariance between outputs (value, d/dx_1..3) at x and at y for a radial
/// kernel f(|x - y|), using the chain rule on f(r):
///   d/dy_j f = -f'(r) d_j / r,   d/dx_i f = f'(r) d_i / r,
///   d2/dx_i dy_j f = -(f'' d_i d_j / r^2 + f' (delta_ij / r - d_i d_j / r^3)),
/// with d = x - y; the r -> 0 limit of the last one is -f''(0) delta_ij.
inline std::array<std::array<LD, 4>, 4> joint_cov(const gpgmm::Vec3 &x, const gpgmm::Vec3 &y, LD s, LD l) {
    LD d[3] = {LD(x[0]) - LD(y[0]), LD(x[1]) - LD(y[1]), LD(x[2]) - LD(y[2])};
    const LD r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    const auto p = matern_profile(r, s, l);
    std::array<std::array<LD, 4>, 4> k{};
    k[0][0] = p.f;
    for (int i = 0; i < 3; ++i) {
        // f'(r)/r is finite at r = 0 for this kernel: -s a^2 e^{-ar}.
        const LD a = std::sqrt(3.0L) / l;
        const LD f1_over_r = -s * a * a * std::exp(-a * r);
        k[0][i + 1] = -f1_over_r * d[i];
        k[i + 1][0] = f1_over_r * d[i];
        for (int j = 0; j < 3; ++j) {
            if (r == 0) {
                k[i + 1][j + 1] = i == j ? -p.f2 : 0;
            } else {
                k[i + 1][j + 1] = -(p.f2 * d[i] * d[j] / (r * r) + p.f1 * ((i == j ? 1 : 0) / r - d[i] * d[j] / (r * r * r)));
            }
        }
    }
    return k;
}

/// Dense GP with derivative observations: K_ij = s_i s_j joint_cov(x_i, x_j).
struct DenseGp {
    std::vector<gpgmm::Vec3> pts;
    std::vector<LD> scales;
    LD l, nv, ng;
    bool gradients;
    LVec alpha;
    LMat gram;

    [[nodiscard]] std::size_t stride() const { return gradients ? 4 : 1; }

    DenseGp(std::vector<gpgmm::Vec3> p, std::vector<LD> s, LD l_, LD nv_, LD ng_, bool grad, const LVec &y)
        : pts(std::move(p)), scales(std::move(s)), l(l_), nv(nv_), ng(ng_), gradients(grad) {
        const std::size_t n = pts.size() * stride();
        gram.assign(n, LVec(n, 0));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t j = 0; j < pts.size(); ++j) {
                const auto k = joint_cov(pts[i], pts[j], scales[i] * scales[j], l);
                for (std::size_t a = 0; a < stride(); ++a) {
                    for (std::size_t b = 0; b < stride(); ++b) gram[i * stride() + a][j * stride() + b] = k[a][b];
                }
            }
            gram[i * stride()][i * stride()] += nv * nv;
            for (std::size_t a = 1; a < stride(); ++a) gram[i * stride() + a][i * stride() + a] += ng * ng;
        }
        alpha = solve(gram, y);
    }

    [[nodiscard]] LVec cross(const gpgmm::Vec3 &x, LD sx) const {
        LVec c(pts.size() * stride());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto k = joint_cov(x, pts[i], sx * scales[i], l);
            for (std::size_t b = 0; b < stride(); ++b) c[i * stride() + b] = k[0][b];
        }
        return c;
    }

    /// Posterior (mean offset, variance without observation noise).
    [[nodiscard]] std::pair<LD, LD> predict(const gpgmm::Vec3 &x, LD sx) const {
        const auto c = cross(x, sx);
        const auto v = solve(gram, c);
        return {dot(c, alpha), sx * sx - dot(c, v)};
    }
};

/// 3x3 inverse and determinant by cofactors.
inline LD det3(const LD m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline void inv3(const LD m[3][3], LD out[3][3]) {
    const LD d = det3(m);
    out[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
    out[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
    out[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
    out[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
    out[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
    out[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
    out[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
    out[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
    out[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
}

struct Component {
    LD weight;
    LD mean[4];
    LD cov[4][4];
};

/// Conditional of y on x via the Schur complement:
/// mu_y + S_yx S_xx^-1 (x - mu_x), S_yy - S_yx S_xx^-1 S_xy.
inline std::pair<LD, LD> schur_conditional(const Component &c, const gpgmm::Vec3 &x) {
    LD sxx[3][3], inv[3][3];
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) sxx[i][j] = c.cov[i][j];
    }
    inv3(sxx, inv);
    LD g[3] = {0, 0, 0};  // S_yx S_xx^-1
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) g[j] += c.cov[3][i] * inv[i][j];
    }
    LD mean = c.mean[3], var = c.cov[3][3];
    for (int j = 0; j < 3; ++j) {
        mean += g[j] * (LD(x[j]) - c.mean[j]);
        var -= g[j] * c.cov[j][3];
    }
    return {mean, var};
}

/// Weighted spatial marginal density pi N(x | mu_x, S_xx).
inline LD weighted_density(const Component &c, const gpgmm::Vec3 &x) {
    LD sxx[3][3], inv[3][3];
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) sxx[i][j] = c.cov[i][j];
    }
    inv3(sxx, inv);
    LD q = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) q += (LD(x[i]) - c.mean[i]) * inv[i][j] * (LD(x[j]) - c.mean[j]);
    }
    const LD pi = 3.14159265358979323846264338327950288L;
    return c.weight * std::exp(-q / 2) / std::sqrt(std::pow(2 * pi, 3) * det3(sxx));
}

/// Mixture regression over all given components.
inline std::pair<LD, LD> gmr(const std::vector<Component> &cs, const gpgmm::Vec3 &x) {
    LD wsum = 0, m = 0, second = 0;
    std::vector<LD> w(cs.size());
    for (std::size_t k = 0; k < cs.size(); ++k) wsum += (w[k] = weighted_density(cs[k], x));
    for (std::size_t k = 0; k < cs.size(); ++k) {
        const auto [mu, var] = schur_conditional(cs[k], x);
        m += w[k] / wsum * mu;
        second += w[k] / wsum * (var + mu * mu);
    }
    return {m, second - m * m};
}

/// Exhaustive k-nearest with (distance, index) ordering.
inline std::vector<std::size_t> brute_knn(const std::vector<gpgmm::Vec3> &pts, const gpgmm::Vec3 &q, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < pts.size(); ++i) all.push_back({(pts[i] - q).squaredNorm(), i});
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(all[i].second);
    return out;
}

/// |a - b| / max(|b|, floor): relative error that stays meaningful near 0.
inline LD rel_err(LD a, LD b, LD floor = 1e-6L) { return std::fabs(a - b) / std::max<LD>(floor, std::fabs(b)); }

}  // namespace oracle
