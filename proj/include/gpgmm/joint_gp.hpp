#pragma once

#include "gpgmm/gp_kernel.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gpgmm {

/// Training data for a GP over distance values and, optionally, their
/// gradients. Targets are residuals against the prior mean.
struct GpTrainingData {
    std::vector<Vec3> points;
    std::vector<double> scales;              // sigma_p(x_i)
    std::vector<double> value_residuals;     // y_i - m(x_i)
    std::vector<Vec3> gradient_residuals;    // grad y_i - grad m(x_i); empty for value-only

    [[nodiscard]] bool with_gradients() const { return !gradient_residuals.empty(); }
    [[nodiscard]] std::size_t rows() const { return points.size() * (with_gradients() ? 4 : 1); }
    void validate() const;
};

/// Exact GP posterior with a Cholesky-factored joint Gram matrix. Rows are
/// grouped per point as (value, d/dx, d/dy, d/dz) when gradients are used.
/// Immutable after fitting.
class JointGp {
public:
    /// Diagonal jitter ladder tried when the plain factorization fails.
    static constexpr double kMaxJitter = 1e-4;

    JointGp() = default;

    /// Factorizes and solves for the weight vector. With `fixed_jitter` the
    /// ladder is skipped and exactly that jitter is used. On failure the
    /// returned object has ok() == false.
    static JointGp fit(GpTrainingData data, const KernelParams &params,
                       std::optional<double> fixed_jitter = std::nullopt);

    [[nodiscard]] bool ok() const { return ok_; }
    [[nodiscard]] double jitter() const { return jitter_; }
    [[nodiscard]] const Eigen::VectorXd &alpha() const { return alpha_; }
    [[nodiscard]] const GpTrainingData &data() const { return data_; }
    [[nodiscard]] const KernelParams &params() const { return params_; }
    [[nodiscard]] std::size_t rows() const { return data_.rows(); }

    struct ValuePosterior {
        double correction = 0.0;  // k*^T alpha
        double reduction = 0.0;   // k*^T (K + N)^-1 k*
    };

    /// Posterior terms for the distance value at x with signal scale `scale`.
    [[nodiscard]] ValuePosterior predict(const Vec3 &x, double scale) const;

    /// Same as predict for many queries, using blocked triangular solves.
    void predict_batch(std::span<const Vec3> xs, std::span<const double> scales,
                       std::span<ValuePosterior> out) const;

    /// The regularized Gram matrix (with noise and jitter) for inspection.
    [[nodiscard]] Eigen::MatrixXd gram() const;

private:
    Eigen::MatrixXd assemble() const;
    void fill_cross(const Vec3 &x, double scale, Eigen::Ref<Eigen::VectorXd> column) const;

    GpTrainingData data_;
    KernelParams params_;
    Eigen::MatrixXd factor_;  // lower triangle holds L
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
    bool ok_ = false;
};

}  // namespace gpgmm
