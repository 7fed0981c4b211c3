#include "gpgmm/normals.hpp"

#include "gpgmm/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gpgmm {

OrientedPointCloud subsample(const OrientedPointCloud &cloud, double rate, std::uint64_t seed) {
    if (!(rate > 0.0 && rate <= 1.0)) throw ArgumentError("subsample rate must be in (0, 1]");
    const std::size_t n = cloud.size();
    // The small offset keeps e.g. 0.15 * 1000 from rounding up to 151.
    auto m = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9));
    m = std::min(m, n);

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return cloud.select(idx);
}

namespace {

bool lex_abs_greater(const Vec3 &a, const Vec3 &b) {
    for (int i = 0; i < 3; ++i) {
        const double x = std::abs(a[i]), y = std::abs(b[i]);
        if (x != y) return x > y;
    }
    return false;
}

void make_dominant_positive(Vec3 &n) {
    Eigen::Index i;
    n.cwiseAbs().maxCoeff(&i);
    if (n[i] < 0.0) n = -n;
}

}  // namespace

OrientedPointCloud estimate_normals_pca(const OrientedPointCloud &cloud, std::size_t k,
                                        const std::optional<Vec3> &viewpoint) {
    if (k < 3) throw ArgumentError("PCA normals need k >= 3");
    if (cloud.size() < k) {
        throw ArgumentError("PCA normals need at least k=" + std::to_string(k) + " points, got " +
                            std::to_string(cloud.size()));
    }
    const KdTree tree(cloud.points);
    OrientedPointCloud out = cloud;
    out.normals.assign(cloud.size(), Vec3::Zero());
    if (viewpoint) out.viewpoint = viewpoint;

    Eigen::SelfAdjointEigenSolver<Mat3> solver;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 &p = cloud.points[i];
        const auto nb = tree.knn(p, k);
        Vec3 centroid = Vec3::Zero();
        for (const auto &q : nb) centroid += cloud.points[q.index];
        centroid /= static_cast<double>(nb.size());
        Mat3 scatter = Mat3::Zero();
        double scale2 = 0.0;
        for (const auto &q : nb) {
            const Vec3 d = cloud.points[q.index] - centroid;
            scatter.noalias() += d * d.transpose();
            scale2 = std::max(scale2, d.squaredNorm());
        }
        const double trace = scatter.trace();
        if (!(trace > 1e-30)) continue;  // coincident neighbourhood: null normal

        solver.compute(scatter);
        const Vec3 ev = solver.eigenvalues();
        Vec3 n = solver.eigenvectors().col(0);
        if (ev[1] - ev[0] <= 1e-12 * trace) {
            const Vec3 alt = solver.eigenvectors().col(1);
            if (lex_abs_greater(alt, n)) n = alt;
        }
        n.normalize();

        if (viewpoint) {
            if (n.dot(*viewpoint - p) < 0.0) n = -n;
        } else {
            const double side = n.dot(p - centroid);
            if (std::abs(side) > 1e-9 * std::sqrt(scale2)) {
                if (side < 0.0) n = -n;
            } else {
                make_dominant_positive(n);
            }
        }
        out.normals[i] = n;
    }
    return out;
}

}  // namespace gpgmm
