#include "gpgmm/gp_field.hpp"

#include "gpgmm/kdtree.hpp"

#include <algorithm>
#include <cmath>

namespace gpgmm {

void GpFieldConfig::validate() const {
    kernel.validate();
    if (active < 1) throw ArgumentError("active component count must be >= 1");
    if (!(gradient_step > 0.0)) throw ArgumentError("gradient step must be > 0");
    if (!(discrepancy > 0.0)) throw ArgumentError("discrepancy threshold d_m must be > 0");
    if (block_capacity < 1) throw ArgumentError("block capacity must be >= 1");
    if (!(halo >= 0.0)) throw ArgumentError("block halo must be >= 0");
    if (!(sigma_floor > 0.0)) throw ArgumentError("sigma floor must be > 0");
    if (max_octree_depth < 0) throw ArgumentError("max octree depth must be >= 0");
}

OrientedPointCloud select_training_points(const HgmmModel &hgmm, const OrientedPointCloud &cloud, double d_m,
                                          std::size_t j) {
    if (!(d_m > 0.0)) throw ArgumentError("discrepancy threshold d_m must be > 0");
    if (!cloud.has_normals()) throw ArgumentError("training point selection needs normals");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (std::abs(regress(hgmm, cloud.points[i], j).mean) > d_m) keep.push_back(i);
    }
    return cloud.select(keep);
}

namespace {

int octant(const Vec3 &p, const Vec3 &center) {
    return (p.x() >= center.x() ? 1 : 0) | (p.y() >= center.y() ? 2 : 0) | (p.z() >= center.z() ? 4 : 0);
}

Box child_box(const Box &b, int o) {
    const Vec3 c = b.center();
    Box out;
    for (int a = 0; a < 3; ++a) {
        const bool upper = (o >> a) & 1;
        out.min[a] = upper ? c[a] : b.min[a];
        out.max[a] = upper ? b.max[a] : c[a];
    }
    return out;
}

struct OctreeBuilder {
    const std::vector<Vec3> &points;
    std::size_t capacity;
    int max_depth;
    BlockLayout &layout;

    void split(int id, std::vector<std::size_t> idx) {
        const OctreeNode node = layout.nodes[static_cast<std::size_t>(id)];
        if (idx.size() <= capacity || node.depth >= max_depth) {
            if (idx.size() > capacity) {
                layout.log.push_back("octree leaf at depth " + std::to_string(node.depth) + " holds " +
                                     std::to_string(idx.size()) + " points (capacity " + std::to_string(capacity) +
                                     ")");
            }
            layout.nodes[static_cast<std::size_t>(id)].block = static_cast<int>(layout.owned.size());
            layout.owned.push_back(std::move(idx));
            return;
        }
        const Vec3 c = node.box.center();
        std::array<std::vector<std::size_t>, 8> parts;
        for (auto i : idx) parts[static_cast<std::size_t>(octant(node.box.clamp(points[i]), c))].push_back(i);
        std::array<int, 8> kids{};
        for (int o = 0; o < 8; ++o) {
            OctreeNode child;
            child.box = child_box(node.box, o);
            child.depth = node.depth + 1;
            kids[static_cast<std::size_t>(o)] = static_cast<int>(layout.nodes.size());
            layout.nodes.push_back(child);
        }
        layout.nodes[static_cast<std::size_t>(id)].children = kids;
        for (int o = 0; o < 8; ++o) split(kids[static_cast<std::size_t>(o)], std::move(parts[static_cast<std::size_t>(o)]));
    }
};

int locate_in(const std::vector<OctreeNode> &nodes, const Vec3 &x) {
    if (nodes.empty()) return -1;
    const Vec3 p = nodes.front().box.clamp(x);
    int id = 0;
    while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
        const auto &n = nodes[static_cast<std::size_t>(id)];
        id = n.children[static_cast<std::size_t>(octant(p, n.box.center()))];
    }
    return id;
}

}  // namespace

int BlockLayout::locate(const Vec3 &x) const { return locate_in(nodes, x); }

BlockLayout build_blocks(const std::vector<Vec3> &points, std::size_t capacity, double halo, const Box &bounds,
                         int max_depth) {
    if (capacity < 1) throw ArgumentError("block capacity must be >= 1");
    if (!(halo >= 0.0)) throw ArgumentError("block halo must be >= 0");
    if (!(bounds.min.array() <= bounds.max.array()).all()) throw ArgumentError("block bounds are inverted");
    BlockLayout layout;
    OctreeNode root;
    root.box = bounds;
    layout.nodes.push_back(root);
    std::vector<std::size_t> all(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) all[i] = i;
    OctreeBuilder{points, capacity, max_depth, layout}.split(0, std::move(all));

    std::vector<int> owner(points.size(), -1);
    for (std::size_t b = 0; b < layout.owned.size(); ++b) {
        for (auto i : layout.owned[b]) owner[i] = static_cast<int>(b);
    }
    layout.context.resize(layout.owned.size());
    if (points.empty() || halo <= 0.0) return layout;
    const KdTree tree(points);
    for (const auto &node : layout.nodes) {
        if (!node.is_leaf()) continue;
        const double reach = 0.5 * node.box.extent().norm() + halo;
        auto &ctx = layout.context[static_cast<std::size_t>(node.block)];
        for (const auto &nb : tree.radius_search(node.box.center(), reach)) {
            if (owner[nb.index] == node.block) continue;
            if (node.box.distance(points[nb.index]) <= halo) ctx.push_back(nb.index);
        }
        std::sort(ctx.begin(), ctx.end());
    }
    return layout;
}

namespace {

GpTrainingData residual_data(const GpBlock &b) {
    GpTrainingData d;
    d.points = b.points;
    d.scales = b.prior_scales;
    d.value_residuals.resize(b.points.size());
    d.gradient_residuals.resize(b.points.size());
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        d.value_residuals[i] = 0.0 - b.prior_means[i];
        d.gradient_residuals[i] = b.normals[i] - b.prior_grad_means[i];
    }
    return d;
}

}  // namespace

GpBlock fit_block(const Box &region, std::vector<Vec3> points, std::vector<Vec3> normals,
                  std::vector<std::uint8_t> owned, const HgmmModel &hgmm, const GpFieldConfig &config) {
    if (points.empty()) throw ArgumentError("fit_block needs a non-empty block");
    if (normals.size() != points.size() || owned.size() != points.size()) {
        throw ArgumentError("fit_block: points, normals and ownership flags differ in length");
    }
    GpBlock b;
    b.region = region;
    b.points = std::move(points);
    b.normals = std::move(normals);
    b.owned = std::move(owned);
    const std::size_t n = b.points.size();
    b.prior_means.resize(n);
    b.prior_grad_means.resize(n);
    b.prior_scales.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto g = regress(hgmm, b.points[i], config.active);
        b.prior_means[i] = g.mean;
        b.prior_scales[i] = std::max(std::sqrt(g.variance), config.sigma_floor);
        b.prior_grad_means[i] = regress_gradient(hgmm, b.points[i], config.active, config.gradient_step);
    }
    b.gp = JointGp::fit(residual_data(b), config.kernel);
    b.prior_only = !b.gp.ok();
    return b;
}

GpBlock restore_block(const Box &region, std::vector<Vec3> points, std::vector<Vec3> normals,
                      std::vector<std::uint8_t> owned, std::vector<double> prior_means,
                      std::vector<Vec3> prior_grad_means, std::vector<double> prior_scales, bool prior_only,
                      double jitter, const Eigen::VectorXd &alpha, const KernelParams &kernel) {
    GpBlock b;
    b.region = region;
    b.points = std::move(points);
    b.normals = std::move(normals);
    b.owned = std::move(owned);
    b.prior_means = std::move(prior_means);
    b.prior_grad_means = std::move(prior_grad_means);
    b.prior_scales = std::move(prior_scales);
    b.prior_only = prior_only;
    if (!prior_only && !b.points.empty()) {
        b.gp = JointGp::fit(residual_data(b), kernel, jitter);
        if (!b.gp.ok()) throw ModelError("stored block no longer factorizes");
        if ((b.gp.alpha() - alpha).cwiseAbs().maxCoeff() > 1e-6 * (1.0 + alpha.cwiseAbs().maxCoeff())) {
            throw ModelError("stored block weights disagree with the refitted system");
        }
    }
    return b;
}

GpFieldModel::GpFieldModel(std::shared_ptr<const HgmmModel> hgmm, GpFieldConfig config,
                           std::vector<OctreeNode> octree, std::vector<GpBlock> blocks)
    : hgmm_(std::move(hgmm)), config_(config), octree_(std::move(octree)), blocks_(std::move(blocks)) {
    if (!hgmm_) throw ArgumentError("GP field needs a mixture prior");
    for (const auto &n : octree_) {
        if (n.is_leaf() && (n.block < 0 || static_cast<std::size_t>(n.block) >= blocks_.size())) {
            throw ModelError("octree leaf refers to a missing block");
        }
    }
}

const HgmmModel &GpFieldModel::hgmm() const {
    if (!hgmm_) throw StateError("GP field is not fitted");
    return *hgmm_;
}

int GpFieldModel::locate(const Vec3 &x) const {
    const int leaf = locate_in(octree_, x);
    return leaf < 0 ? -1 : octree_[static_cast<std::size_t>(leaf)].block;
}

FieldPrediction GpFieldModel::predict(const Vec3 &x) const {
    if (!hgmm_) throw StateError("GP field is not fitted");
    const auto prior = regress(*hgmm_, x, config_.active);
    const double noise = config_.kernel.value_noise * config_.kernel.value_noise;
    const int b = locate(x);
    if (b < 0 || blocks_[static_cast<std::size_t>(b)].prior_only) return {prior.mean, prior.variance + noise};
    const double scale = std::max(std::sqrt(prior.variance), config_.sigma_floor);
    const auto post = blocks_[static_cast<std::size_t>(b)].gp.predict(x, scale);
    return {prior.mean + post.correction, std::max(scale * scale - post.reduction, 0.0) + noise};
}

void GpFieldModel::predict_batch(std::span<const Vec3> xs, std::span<FieldPrediction> out) const {
    if (!hgmm_) throw StateError("GP field is not fitted");
    if (xs.size() != out.size()) throw ArgumentError("batch size mismatch");
    const double noise = config_.kernel.value_noise * config_.kernel.value_noise;
    std::vector<std::vector<std::size_t>> per_block(blocks_.size());
    std::vector<double> scale(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto prior = regress(*hgmm_, xs[i], config_.active);
        out[i] = {prior.mean, prior.variance + noise};
        scale[i] = std::max(std::sqrt(prior.variance), config_.sigma_floor);
        const int b = locate(xs[i]);
        if (b >= 0 && !blocks_[static_cast<std::size_t>(b)].prior_only) per_block[static_cast<std::size_t>(b)].push_back(i);
    }
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto &idx = per_block[b];
        if (idx.empty()) continue;
        std::vector<Vec3> pts(idx.size());
        std::vector<double> sc(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            pts[k] = xs[idx[k]];
            sc[k] = scale[idx[k]];
        }
        std::vector<JointGp::ValuePosterior> post(idx.size());
        blocks_[b].gp.predict_batch(pts, sc, post);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            auto &o = out[idx[k]];
            o.mean += post[k].correction;
            o.variance = std::max(sc[k] * sc[k] - post[k].reduction, 0.0) + noise;
        }
    }
}

GpFieldModel fit_gp_field(std::shared_ptr<const HgmmModel> hgmm, const OrientedPointCloud &cloud,
                          const GpFieldConfig &config, GpFieldFitStats *stats) {
    if (!hgmm) throw ArgumentError("GP field needs a mixture prior");
    config.validate();
    const OrientedPointCloud valid = cloud.with_valid_normals();
    const OrientedPointCloud selected = select_training_points(*hgmm, valid, config.discrepancy, config.active);

    std::vector<OctreeNode> octree;
    std::vector<GpBlock> blocks;
    std::vector<std::string> log;
    if (selected.empty()) {
        OctreeNode root;
        root.box = valid.empty() ? Box{} : Box::bounding(valid.points);
        root.block = 0;
        octree.push_back(root);
        GpBlock empty;
        empty.region = root.box;
        blocks.push_back(std::move(empty));
        log.push_back("no points exceed d_m; the mixture prior stands alone");
    } else {
        const Box bounds = Box::bounding(selected.points);
        BlockLayout layout = build_blocks(selected.points, config.block_capacity, config.halo, bounds,
                                          config.max_octree_depth);
        log.insert(log.end(), layout.log.begin(), layout.log.end());
        for (const auto &node : layout.nodes) {
            if (!node.is_leaf()) continue;
            const auto b = static_cast<std::size_t>(node.block);
            std::vector<Vec3> pts, nrm;
            std::vector<std::uint8_t> own;
            for (auto i : layout.owned[b]) {
                pts.push_back(selected.points[i]);
                nrm.push_back(selected.normals[i]);
                own.push_back(1);
            }
            for (auto i : layout.context[b]) {
                pts.push_back(selected.points[i]);
                nrm.push_back(selected.normals[i]);
                own.push_back(0);
            }
            if (pts.empty()) {
                GpBlock empty;
                empty.region = node.box;
                blocks.push_back(std::move(empty));
                continue;
            }
            blocks.push_back(fit_block(node.box, std::move(pts), std::move(nrm), std::move(own), *hgmm, config));
            if (blocks.back().prior_only) {
                log.push_back("block " + std::to_string(b) + " failed to factorize; using the mixture prior");
            }
        }
        octree = std::move(layout.nodes);
    }
    if (stats) {
        stats->input_points = valid.size();
        stats->selected_points = selected.size();
        stats->blocks = blocks.size();
        stats->prior_only_blocks = static_cast<std::size_t>(
            std::count_if(blocks.begin(), blocks.end(), [](const GpBlock &b) { return b.prior_only; }));
        stats->log = log;
    }
    return GpFieldModel(std::move(hgmm), config, std::move(octree), std::move(blocks));
}

}  // namespace gpgmm
