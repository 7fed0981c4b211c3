#pragma once

#include "gpgmm/gmr.hpp"
#include "gpgmm/joint_gp.hpp"

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gpgmm {

struct GpFieldConfig {
    KernelParams kernel;
    std::size_t active = 8;          // J
    double gradient_step = 1e-4;     // h for grad m, meters
    double discrepancy = 0.02;       // d_m, meters
    std::size_t block_capacity = 300;
    double halo = 0.3;               // meters; one length scale
    double sigma_floor = 1e-4;       // lower bound on sigma_p, meters
    int max_octree_depth = 12;

    void validate() const;
};

/// Hit points whose regressed distance exceeds d_m in magnitude. Hits have a
/// true distance of zero, so this is the mixture's residual test.
OrientedPointCloud select_training_points(const HgmmModel &hgmm, const OrientedPointCloud &cloud, double d_m,
                                          std::size_t j);

struct OctreeNode {
    Box box;
    int depth = 0;
    std::array<int, 8> children{-1, -1, -1, -1, -1, -1, -1, -1};
    int block = -1;  // leaves only

    [[nodiscard]] bool is_leaf() const { return children[0] < 0; }
};

/// Octree partition of a point set. Leaf `b` owns `owned[b]` and sees the
/// non-owned points within `halo` of its box as `context[b]`.
struct BlockLayout {
    std::vector<OctreeNode> nodes;  // nodes[0] is the root
    std::vector<std::vector<std::size_t>> owned;
    std::vector<std::vector<std::size_t>> context;
    std::vector<std::string> log;

    [[nodiscard]] std::size_t block_count() const { return owned.size(); }
    /// Leaf node whose box contains x; outside points use the nearest leaf.
    [[nodiscard]] int locate(const Vec3 &x) const;
};

BlockLayout build_blocks(const std::vector<Vec3> &points, std::size_t capacity, double halo, const Box &bounds,
                         int max_depth = 12);

/// One local GP expert of the field.
struct GpBlock {
    Box region;
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<std::uint8_t> owned;  // 0 for halo context points
    std::vector<double> prior_means;
    std::vector<Vec3> prior_grad_means;
    std::vector<double> prior_scales;
    JointGp gp;
    bool prior_only = true;
};

/// Fits one block: GMR prior mean, gradient and scale at each point, then the
/// joint GP on the residuals (0 - m, n - grad m). Falls back to prior-only if
/// the factorization fails even with jitter.
GpBlock fit_block(const Box &region, std::vector<Vec3> points, std::vector<Vec3> normals,
                  std::vector<std::uint8_t> owned, const HgmmModel &hgmm, const GpFieldConfig &config);

/// Rebuilds a block from stored arrays, reusing the stored jitter and weights.
GpBlock restore_block(const Box &region, std::vector<Vec3> points, std::vector<Vec3> normals,
                      std::vector<std::uint8_t> owned, std::vector<double> prior_means,
                      std::vector<Vec3> prior_grad_means, std::vector<double> prior_scales, bool prior_only,
                      double jitter, const Eigen::VectorXd &alpha, const KernelParams &kernel);

/// GMR prior refined by an octree of local derivative-observation GPs.
class GpFieldModel {
public:
    GpFieldModel() = default;
    GpFieldModel(std::shared_ptr<const HgmmModel> hgmm, GpFieldConfig config, std::vector<OctreeNode> octree,
                 std::vector<GpBlock> blocks);

    [[nodiscard]] FieldPrediction predict(const Vec3 &x) const;
    void predict_batch(std::span<const Vec3> xs, std::span<FieldPrediction> out) const;

    [[nodiscard]] bool fitted() const { return hgmm_ != nullptr; }
    [[nodiscard]] const HgmmModel &hgmm() const;
    [[nodiscard]] const GpFieldConfig &config() const { return config_; }
    [[nodiscard]] const std::vector<OctreeNode> &octree() const { return octree_; }
    [[nodiscard]] const std::vector<GpBlock> &blocks() const { return blocks_; }
    [[nodiscard]] int locate(const Vec3 &x) const;

private:
    std::shared_ptr<const HgmmModel> hgmm_;
    GpFieldConfig config_;
    std::vector<OctreeNode> octree_;
    std::vector<GpBlock> blocks_;
};

struct GpFieldFitStats {
    std::size_t input_points = 0;
    std::size_t selected_points = 0;
    std::size_t blocks = 0;
    std::size_t prior_only_blocks = 0;
    std::vector<std::string> log;
};

/// Selects poorly modelled hits, partitions them and fits every block.
/// `cloud` must carry valid normals.
GpFieldModel fit_gp_field(std::shared_ptr<const HgmmModel> hgmm, const OrientedPointCloud &cloud,
                          const GpFieldConfig &config, GpFieldFitStats *stats = nullptr);

}  // namespace gpgmm
