#pragma once

#include "gpgmm/geometry.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gpgmm {

/// A 4D training sample: position plus signed distance to the surface.
struct DistanceSample {
    Vec3 position = Vec3::Zero();
    double distance = 0.0;
};

/// One joint Gaussian over (x, y, z, distance). The precision is derived from
/// the covariance on construction and kept consistent with it.
struct Gaussian4 {
    double weight = 1.0;
    Vec4 mean = Vec4::Zero();
    Mat4 covariance = Mat4::Identity();
    Mat4 precision = Mat4::Identity();

    /// Throws ModelError if the covariance is not symmetric positive definite.
    static Gaussian4 make(double weight, const Vec4 &mean, const Mat4 &covariance);
};

struct EmConfig {
    int max_iter = 100;
    double tol = 1e-5;      // relative log-likelihood improvement
    double reg_eps = 1e-6;  // added to every covariance diagonal, m^2
};

struct EmResult {
    std::vector<Gaussian4> components;
    /// Total data log-likelihood of the parameters entering each E-step.
    std::vector<double> log_likelihood;
    /// Indices into log_likelihood after which components were deleted; the
    /// likelihood is only monotone between such events.
    std::vector<std::size_t> deletions;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> log;
};

/// (p, 0), (p + s n, +s), (p - s n, -s) for every hit. Throws ArgumentError
/// naming the offending indices if any normal is missing or null.
std::vector<DistanceSample> augment_virtual_points(const OrientedPointCloud &cloud, double spacing);

/// EM for a K-component 4D mixture, seeded by k-means++.
EmResult fit_em(std::span<const DistanceSample> samples, std::size_t k, const EmConfig &config,
                std::uint64_t seed);

/// EM from explicit initial components.
EmResult fit_em(std::span<const DistanceSample> samples, std::vector<Gaussian4> init,
                const EmConfig &config);

/// Smallest eigenvalue over the eigenvalue sum of a symmetric PSD matrix; 0
/// when the trace vanishes. Throws ArgumentError if asymmetric beyond 1e-9.
double principal_curvature(const Eigen::MatrixXd &covariance);

struct HgmmConfig {
    std::size_t root_k = 4;
    std::size_t fanout = 4;
    double curvature_threshold = 0.01;
    int max_depth = 6;
    std::size_t min_points = 50;
    /// Use the 3x3 spatial block instead of the full 4x4 covariance.
    bool spatial_curvature = false;
    std::uint64_t seed = 42;
    EmConfig em;
};

struct HgmmNode {
    Gaussian4 component;
    double curvature = 0.0;
    int depth = 0;
    std::size_t support = 0;  // hard-assigned samples
    std::vector<HgmmNode> children;
};

/// Hierarchical mixture. The leaves form the regression mixture; their
/// weights sum to one. Per-leaf conditioning terms are cached for GMR.
class HgmmModel {
public:
    struct LeafCache {
        Vec3 spatial_mean;
        Mat3 spatial_chol;      // lower Cholesky factor of Sigma_XX
        double log_norm = 0.0;  // log(pi) - log|Sigma_XX|/2 - 1.5 log(2 pi)
        Vec3 slope;             // -Lambda_YX / Lambda_YY
        double distance_mean = 0.0;
        double conditional_variance = 0.0;  // 1 / Lambda_YY
    };

    HgmmModel() = default;
    HgmmModel(std::vector<Gaussian4> leaves, std::vector<int> depths, HgmmConfig config,
              std::vector<HgmmNode> roots = {}, std::vector<std::string> log = {});

    [[nodiscard]] const std::vector<Gaussian4> &leaves() const { return leaves_; }
    [[nodiscard]] const std::vector<int> &depths() const { return depths_; }
    [[nodiscard]] const std::vector<HgmmNode> &roots() const { return roots_; }
    [[nodiscard]] const HgmmConfig &config() const { return config_; }
    [[nodiscard]] const std::vector<std::string> &log() const { return log_; }
    [[nodiscard]] const std::vector<LeafCache> &cache() const { return cache_; }
    [[nodiscard]] std::size_t size() const { return leaves_.size(); }
    [[nodiscard]] int max_leaf_depth() const;

private:
    std::vector<Gaussian4> leaves_;
    std::vector<int> depths_;
    HgmmConfig config_;
    std::vector<HgmmNode> roots_;
    std::vector<std::string> log_;
    std::vector<LeafCache> cache_;
};

HgmmModel fit_hgmm(std::span<const DistanceSample> samples, const HgmmConfig &config);

/// Versioned text record, one leaf per line with 17 significant digits:
/// weight, 4 mean entries, 10 upper-triangular covariance entries, depth.
void write_hgmm(std::ostream &out, const HgmmModel &model);
HgmmModel read_hgmm(std::istream &in);

}  // namespace gpgmm
