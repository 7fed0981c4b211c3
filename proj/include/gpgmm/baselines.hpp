#pragma once

#include "gpgmm/geometry.hpp"
#include "gpgmm/joint_gp.hpp"

#include <span>

namespace gpgmm {

enum class BaselineKind { Gpis, LogGpis };

/// Stationary GP surface maps used as comparison points.
///
/// GPIS regresses distance with value and normal observations, a constant
/// prior mean and a constant signal scale. Log-GPIS regresses the heat value
/// v = exp(-sqrt(3) d / l) (1 on the surface, 0 far away) from values only and
/// recovers an unsigned distance through the log transform.
class BaselineModel {
public:
    BaselineModel() = default;
    BaselineModel(BaselineKind kind, JointGp gp, double prior_mean, double prior_scale, double d_max);

    [[nodiscard]] BaselineKind kind() const { return kind_; }
    [[nodiscard]] const JointGp &gp() const { return gp_; }
    [[nodiscard]] double prior_mean() const { return prior_mean_; }
    [[nodiscard]] double prior_scale() const { return prior_scale_; }
    [[nodiscard]] double d_max() const { return d_max_; }
    [[nodiscard]] bool fitted() const { return gp_.ok(); }

    /// GP posterior of the regressed quantity itself (distance for GPIS, heat
    /// value for Log-GPIS), including observation noise.
    [[nodiscard]] FieldPrediction predict_raw(const Vec3 &x) const;
    /// Distance estimate: SDF for GPIS, EDF for Log-GPIS.
    [[nodiscard]] FieldPrediction predict(const Vec3 &x) const;
    void predict_batch(std::span<const Vec3> xs, std::span<FieldPrediction> out) const;

private:
    [[nodiscard]] FieldPrediction to_distance(double correction, double reduction) const;

    BaselineKind kind_ = BaselineKind::Gpis;
    JointGp gp_;
    double prior_mean_ = 0.2;
    double prior_scale_ = 1.0;
    double d_max_ = 2.0;
};

inline constexpr double kGpisPriorMean = 0.2;
inline constexpr double kLogGpisFloor = 1e-12;

BaselineModel gpis_fit(const OrientedPointCloud &cloud, const KernelParams &params,
                       double prior_mean = kGpisPriorMean, double prior_scale = 1.0);

BaselineModel loggpis_fit(const OrientedPointCloud &cloud, const KernelParams &params, double d_max = 2.0);

/// -(l / sqrt 3) ln v clamped to [0, d_max]; v <= v_floor gives d_max.
double loggpis_distance(double v, double length_scale, double d_max = 2.0, double v_floor = kLogGpisFloor);

/// Delta-method variance (l / (sqrt 3 v))^2 v_var.
double loggpis_variance(double v_var, double v, double length_scale);

}  // namespace gpgmm
