#include "gpgmm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gpgmm {

namespace {
constexpr double kSqrt3 = 1.7320508075688772935;
}

double loggpis_distance(double v, double length_scale, double d_max, double v_floor) {
    if (!(length_scale > 0.0)) throw ArgumentError("length scale must be > 0");
    if (!(v > v_floor)) return d_max;
    return std::clamp(-(length_scale / kSqrt3) * std::log(v), 0.0, d_max);
}

double loggpis_variance(double v_var, double v, double length_scale) {
    if (!(length_scale > 0.0)) throw ArgumentError("length scale must be > 0");
    const double g = length_scale / (kSqrt3 * v);
    return g * g * v_var;
}

BaselineModel::BaselineModel(BaselineKind kind, JointGp gp, double prior_mean, double prior_scale, double d_max)
    : kind_(kind), gp_(std::move(gp)), prior_mean_(prior_mean), prior_scale_(prior_scale), d_max_(d_max) {}

FieldPrediction BaselineModel::predict_raw(const Vec3 &x) const {
    if (!gp_.ok()) throw StateError("baseline model is not fitted");
    const auto p = gp_.predict(x, prior_scale_);
    const double noise = gp_.params().value_noise * gp_.params().value_noise;
    return {prior_mean_ + p.correction, std::max(prior_scale_ * prior_scale_ - p.reduction, 0.0) + noise};
}

FieldPrediction BaselineModel::to_distance(double correction, double reduction) const {
    const double noise = gp_.params().value_noise * gp_.params().value_noise;
    const FieldPrediction raw{prior_mean_ + correction,
                              std::max(prior_scale_ * prior_scale_ - reduction, 0.0) + noise};
    if (kind_ == BaselineKind::Gpis) return raw;
    const double l = gp_.params().length_scale;
    FieldPrediction out;
    out.mean = loggpis_distance(raw.mean, l, d_max_);
    // Beyond the floor the linearization is meaningless; the clamp range
    // bounds the spread instead.
    out.variance = raw.mean > kLogGpisFloor ? std::min(loggpis_variance(raw.variance, raw.mean, l), d_max_ * d_max_)
                                            : d_max_ * d_max_;
    return out;
}

FieldPrediction BaselineModel::predict(const Vec3 &x) const {
    if (!gp_.ok()) throw StateError("baseline model is not fitted");
    const auto p = gp_.predict(x, prior_scale_);
    return to_distance(p.correction, p.reduction);
}

void BaselineModel::predict_batch(std::span<const Vec3> xs, std::span<FieldPrediction> out) const {
    if (!gp_.ok()) throw StateError("baseline model is not fitted");
    if (xs.size() != out.size()) throw ArgumentError("batch size mismatch");
    std::vector<double> scales(xs.size(), prior_scale_);
    std::vector<JointGp::ValuePosterior> post(xs.size());
    gp_.predict_batch(xs, scales, post);
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = to_distance(post[i].correction, post[i].reduction);
}

BaselineModel gpis_fit(const OrientedPointCloud &cloud, const KernelParams &params, double prior_mean,
                       double prior_scale) {
    if (!(prior_scale > 0.0)) throw ArgumentError("GPIS prior scale must be > 0");
    const OrientedPointCloud valid = cloud.with_valid_normals();
    if (!cloud.has_normals()) throw ArgumentError("GPIS needs normals");
    if (valid.empty()) throw ArgumentError("GPIS needs at least one point with a valid normal");
    GpTrainingData d;
    d.points = valid.points;
    d.scales.assign(valid.size(), prior_scale);
    d.value_residuals.assign(valid.size(), 0.0 - prior_mean);
    d.gradient_residuals = valid.normals;
    auto gp = JointGp::fit(std::move(d), params);
    if (!gp.ok()) throw ModelError("GPIS factorization failed even with jitter");
    return {BaselineKind::Gpis, std::move(gp), prior_mean, prior_scale, 0.0};
}

BaselineModel loggpis_fit(const OrientedPointCloud &cloud, const KernelParams &params, double d_max) {
    if (!(d_max > 0.0)) throw ArgumentError("d_max must be > 0");
    if (cloud.empty()) throw ArgumentError("Log-GPIS needs at least one point");
    GpTrainingData d;
    d.points = cloud.points;
    d.scales.assign(cloud.size(), 1.0);
    d.value_residuals.assign(cloud.size(), 1.0);
    auto gp = JointGp::fit(std::move(d), params);
    if (!gp.ok()) throw ModelError("Log-GPIS factorization failed even with jitter");
    return {BaselineKind::LogGpis, std::move(gp), 0.0, 1.0, d_max};
}

}  // namespace gpgmm
