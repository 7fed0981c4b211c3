#include "gpgmm/gmr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gpgmm {

namespace {

constexpr double kUnderflowLogDensity = -700.0;

double log_weighted_density(const HgmmModel::LeafCache &c, const Vec3 &x) {
    const Vec3 z = c.spatial_chol.triangularView<Eigen::Lower>().solve(x - c.spatial_mean);
    return c.log_norm - 0.5 * z.squaredNorm();
}

}  // namespace

Conditional conditional(const Gaussian4 &component, const Vec3 &x) {
    const double lyy = component.precision(3, 3);
    if (!(lyy > 0.0)) throw ModelError("component has non-positive Lambda_YY");
    const Vec3 lyx = component.precision.block<1, 3>(3, 0).transpose();
    return {component.mean[3] - lyx.dot(x - component.mean.head<3>()) / lyy, 1.0 / lyy};
}

std::vector<std::size_t> select_active(const HgmmModel &model, const Vec3 &x, std::size_t j) {
    if (j < 1) throw ArgumentError("active component count J must be >= 1");
    const auto &cache = model.cache();
    std::vector<double> score(cache.size());
    for (std::size_t k = 0; k < cache.size(); ++k) score[k] = log_weighted_density(cache[k], x);
    std::vector<std::size_t> idx(cache.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t m = std::min(j, idx.size());
    auto better = [&](std::size_t a, std::size_t b) {
        return score[a] > score[b] || (score[a] == score[b] && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(), better);
    idx.resize(m);
    return idx;
}

GmrPrediction regress_with(const HgmmModel &model, const Vec3 &x, const std::vector<std::size_t> &active) {
    if (model.size() == 0) throw StateError("regression on an empty mixture");
    if (active.empty()) throw ArgumentError("regression needs at least one active component");
    const auto &cache = model.cache();
    std::vector<double> logw(active.size());
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
        logw[i] = log_weighted_density(cache.at(active[i]), x);
        max_log = std::max(max_log, logw[i]);
    }
    GmrPrediction out;
    out.underflow = max_log < kUnderflowLogDensity;

    // Log-sum-exp keeps the weights well defined at any range; uniform weights
    // are used only if the densities cannot be evaluated at all.
    std::vector<double> w(active.size());
    if (std::isfinite(max_log)) {
        double total = 0.0;
        for (std::size_t i = 0; i < active.size(); ++i) {
            w[i] = std::exp(logw[i] - max_log);
            total += w[i];
        }
        for (auto &v : w) v /= total;
    } else {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(active.size()));
        out.underflow = true;
    }

    double mean = 0.0, second = 0.0;
    for (std::size_t i = 0; i < active.size(); ++i) {
        const auto &c = cache[active[i]];
        const double mu = c.distance_mean + c.slope.dot(x - c.spatial_mean);
        mean += w[i] * mu;
        second += w[i] * (c.conditional_variance + mu * mu);
    }
    out.mean = mean;
    out.variance = std::max(second - mean * mean, 0.0);
    return out;
}

GmrPrediction regress(const HgmmModel &model, const Vec3 &x, std::size_t j) {
    if (model.size() == 0) throw StateError("regression on an empty mixture");
    return regress_with(model, x, select_active(model, x, j));
}

Vec3 regress_gradient(const HgmmModel &model, const Vec3 &x, std::size_t j, double h) {
    if (!(h > 0.0)) throw ArgumentError("finite-difference step must be > 0");
    const auto active = select_active(model, x, j);
    Vec3 g;
    for (int axis = 0; axis < 3; ++axis) {
        Vec3 xp = x, xm = x;
        xp[axis] += h;
        xm[axis] -= h;
        g[axis] = (regress_with(model, xp, active).mean - regress_with(model, xm, active).mean) / (2.0 * h);
    }
    return g;
}

}  // namespace gpgmm
