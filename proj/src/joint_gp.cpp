#include "gpgmm/joint_gp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace gpgmm {

namespace {
constexpr double kSqrt3 = 1.7320508075688772935;
constexpr Eigen::Index kBatch = 256;
}  // namespace

void GpTrainingData::validate() const {
    const std::size_t n = points.size();
    if (scales.size() != n || value_residuals.size() != n) throw ArgumentError("GP training arrays differ in length");
    if (!gradient_residuals.empty() && gradient_residuals.size() != n) {
        throw ArgumentError("GP gradient residuals differ in length");
    }
    for (double s : scales) {
        if (!(s >= 0.0)) throw ArgumentError("GP signal scales must be >= 0");
    }
}

Eigen::MatrixXd JointGp::assemble() const {
    const auto n = static_cast<Eigen::Index>(data_.points.size());
    const double l = params_.length_scale;
    const double noise_v = params_.value_noise * params_.value_noise + jitter_;
    if (!data_.with_gradients()) {
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = j; i < n; ++i) {
                k(i, j) = matern32(data_.points[i], data_.points[j], data_.scales[i], data_.scales[j], l);
            }
            k(j, j) += noise_v;
        }
        return k;
    }
    const double noise_g = params_.gradient_noise * params_.gradient_noise + jitter_;
    Eigen::MatrixXd k(4 * n, 4 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            k.block<4, 4>(4 * i, 4 * j) =
                joint_kernel_block(data_.points[i], data_.points[j], data_.scales[i], data_.scales[j], l);
        }
        k(4 * j, 4 * j) += noise_v;
        for (int a = 1; a < 4; ++a) k(4 * j + a, 4 * j + a) += noise_g;
    }
    // Only the lower triangle is consumed; mirror it for gram().
    return k;
}

Eigen::MatrixXd JointGp::gram() const {
    Eigen::MatrixXd k = assemble();
    k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
    return k;
}

JointGp JointGp::fit(GpTrainingData data, const KernelParams &params, std::optional<double> fixed_jitter) {
    params.validate();
    data.validate();
    JointGp gp;
    gp.data_ = std::move(data);
    gp.params_ = params;
    if (gp.data_.points.empty()) return gp;

    std::vector<double> ladder;
    if (fixed_jitter) {
        ladder.push_back(*fixed_jitter);
    } else {
        ladder.push_back(0.0);
        for (double j = 1e-10; j <= kMaxJitter * 1.0000001; j *= 10.0) ladder.push_back(j);
    }

    const auto rows = static_cast<Eigen::Index>(gp.data_.rows());
    Eigen::VectorXd y(rows);
    const int stride = gp.data_.with_gradients() ? 4 : 1;
    for (std::size_t i = 0; i < gp.data_.points.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i) * stride;
        y[r] = gp.data_.value_residuals[i];
        if (stride == 4) y.segment<3>(r + 1) = gp.data_.gradient_residuals[i];
    }

    for (double jitter : ladder) {
        gp.jitter_ = jitter;
        gp.factor_ = gp.assemble();
        Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(gp.factor_);
        if (llt.info() != Eigen::Success) continue;
        if (!(gp.factor_.diagonal().array() > 0.0).all()) continue;
        gp.alpha_ = llt.solve(y);
        if (!gp.alpha_.allFinite()) continue;
        gp.ok_ = true;
        return gp;
    }
    gp.factor_.resize(0, 0);
    gp.alpha_.resize(0);
    return gp;
}

void JointGp::fill_cross(const Vec3 &x, double scale, Eigen::Ref<Eigen::VectorXd> column) const {
    const double a = kSqrt3 / params_.length_scale;
    const bool grad = data_.with_gradients();
    for (std::size_t i = 0; i < data_.points.size(); ++i) {
        const Vec3 d = x - data_.points[i];
        const double r = d.norm();
        const double s = scale * data_.scales[i];
        const double e = std::exp(-a * r);
        if (!grad) {
            column[static_cast<Eigen::Index>(i)] = s * (1.0 + a * r) * e;
            continue;
        }
        const auto row = 4 * static_cast<Eigen::Index>(i);
        column[row] = s * (1.0 + a * r) * e;
        column.segment<3>(row + 1) = (s * a * a * e) * d;  // cov(f(x), grad f(x_i))
    }
}

JointGp::ValuePosterior JointGp::predict(const Vec3 &x, double scale) const {
    if (!ok_) throw StateError("GP is not fitted");
    Eigen::VectorXd k(static_cast<Eigen::Index>(rows()));
    fill_cross(x, scale, k);
    ValuePosterior out;
    out.correction = k.dot(alpha_);
    factor_.triangularView<Eigen::Lower>().solveInPlace(k);
    out.reduction = k.squaredNorm();
    return out;
}

void JointGp::predict_batch(std::span<const Vec3> xs, std::span<const double> scales,
                            std::span<ValuePosterior> out) const {
    if (!ok_) throw StateError("GP is not fitted");
    if (xs.size() != scales.size() || xs.size() != out.size()) throw ArgumentError("batch size mismatch");
    const auto rows = static_cast<Eigen::Index>(this->rows());
    const auto total = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd k(rows, std::min(kBatch, std::max<Eigen::Index>(total, 1)));
    for (Eigen::Index start = 0; start < total; start += kBatch) {
        const Eigen::Index m = std::min(kBatch, total - start);
        for (Eigen::Index j = 0; j < m; ++j) {
            fill_cross(xs[static_cast<std::size_t>(start + j)], scales[static_cast<std::size_t>(start + j)], k.col(j));
        }
        auto block = k.leftCols(m);
        const Eigen::VectorXd corr = block.transpose() * alpha_;
        factor_.triangularView<Eigen::Lower>().solveInPlace(block);
        const Eigen::VectorXd red = block.colwise().squaredNorm().transpose();
        for (Eigen::Index j = 0; j < m; ++j) {
            out[static_cast<std::size_t>(start + j)] = {corr[j], red[j]};
        }
    }
}

}  // namespace gpgmm
