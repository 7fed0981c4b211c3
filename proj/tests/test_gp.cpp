#include "test_util.hpp"

#include <gpgmm/geometry.hpp>
#include <gpgmm/gp_field.hpp>
#include <gpgmm/gp_kernel.hpp>
#include <gpgmm/joint_gp.hpp>

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

using namespace gpgmm;

namespace {

/// One-leaf prior with mean distance slope . (x - mu_x) + mu_y and a constant
/// conditional variance `var`.
std::shared_ptr<const HgmmModel> affine_prior(const Vec3 &slope, double mu_y, double var) {
    Mat4 cov = Mat4::Identity();
    cov.block<3, 1>(0, 3) = slope;
    cov.block<1, 3>(3, 0) = slope.transpose();
    cov(3, 3) = slope.squaredNorm() + var;
    Vec4 mean = Vec4::Zero();
    mean[3] = mu_y;
    return std::make_shared<const HgmmModel>(std::vector<Gaussian4>{Gaussian4::make(1.0, mean, cov)},
                                             std::vector<int>{0}, HgmmConfig{});
}

std::vector<Vec3> random_points(std::size_t n, std::mt19937_64 &rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<Vec3> p(n);
    for (auto &x : p) x = Vec3(u(rng), u(rng), u(rng));
    return p;
}

GpFieldModel single_block_field(std::shared_ptr<const HgmmModel> prior, const std::vector<Vec3> &pts,
                                const std::vector<Vec3> &normals, const GpFieldConfig &cfg) {
    OctreeNode root;
    root.box = Box::bounding(pts);
    root.block = 0;
    std::vector<GpBlock> blocks;
    blocks.push_back(fit_block(root.box, pts, normals, std::vector<std::uint8_t>(pts.size(), 1), *prior, cfg));
    return GpFieldModel(prior, cfg, {root}, std::move(blocks));
}

}  // namespace

TEST_CASE("matern32 values") {
    const Vec3 o = Vec3::Zero();
    CHECK(matern32(o, o, 0.7, 0.7, 0.3) == doctest::Approx(0.49).epsilon(1e-15));
    CHECK(matern32(o, Vec3(0.3, 0, 0), 1, 1, 0.3) ==
          doctest::Approx((1 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0))).epsilon(1e-14));
    CHECK(matern32(o, Vec3(0.3, 0, 0), 1, 1, 0.3) == doctest::Approx(0.48335).epsilon(1e-5));
    CHECK(matern32(o, Vec3(30, 0, 0), 1, 1, 0.3) < 1e-70);
}

TEST_CASE("joint kernel block at r = 0") {
    const Mat4 k = joint_kernel_block(Vec3(1, 2, 3), Vec3(1, 2, 3), 0.5, 0.5, 0.3);
    Mat4 want = Mat4::Zero();
    want(0, 0) = 0.25;
    for (int i = 1; i < 4; ++i) want(i, i) = 3 * 0.25 / 0.09;
    CHECK((k - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("joint kernel block: symmetry and oracle") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> s(0.1, 2.0);
    for (int t = 0; t < 200; ++t) {
        const auto p = random_points(2, rng);
        const double a = s(rng), b = s(rng);
        const Mat4 k = joint_kernel_block(p[0], p[1], a, b, 0.4);
        const Mat4 kt = joint_kernel_block(p[1], p[0], b, a, 0.4);
        CHECK((k - kt.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        const auto o = oracle::joint_cov(p[0], p[1], oracle::LD(a) * b, 0.4L);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) CHECK(oracle::rel_err(k(i, j), o[i][j], 1e-9) <= 1e-10);
        }
    }
}

TEST_CASE("joint kernel block matches finite differences of the kernel") {
    std::mt19937_64 rng(2);
    const double h = 1e-5, l = 0.5;
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const auto p = random_points(2, rng, 0.6);
        const Vec3 x = p[0], y = p[1];
        const Mat4 k = joint_kernel_block(x, y, 1.3, 0.8, l);
        auto f = [&](const Vec3 &a, const Vec3 &b) { return matern32(a, b, 1.3, 0.8, l); };
        for (int j = 0; j < 3; ++j) {
            const Vec3 e = h * Vec3::Unit(j);
            const double dy = (f(x, y + e) - f(x, y - e)) / (2 * h);
            const double dx = (f(x + e, y) - f(x - e, y)) / (2 * h);
            worst = std::max(worst, std::abs(k(0, j + 1) - dy) / std::max(std::abs(dy), 1e-3));
            worst = std::max(worst, std::abs(k(j + 1, 0) - dx) / std::max(std::abs(dx), 1e-3));
            for (int i = 0; i < 3; ++i) {
                const Vec3 ei = h * Vec3::Unit(i);
                const double dxy = (f(x + ei, y + e) - f(x + ei, y - e) - f(x - ei, y + e) + f(x - ei, y - e)) / (4 * h * h);
                worst = std::max(worst, std::abs(k(i + 1, j + 1) - dxy) / std::max(std::abs(dxy), 1.0));
            }
        }
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("JointGp matches a dense extended-precision solve") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> s(0.05, 0.5), r(-0.3, 0.3);
    for (bool grad : {true, false}) {
        for (std::size_t n : {1u, 5u, 20u}) {
            GpTrainingData d;
            d.points = random_points(n, rng, 0.5);
            for (std::size_t i = 0; i < n; ++i) {
                d.scales.push_back(s(rng));
                d.value_residuals.push_back(r(rng));
                if (grad) d.gradient_residuals.push_back(Vec3(r(rng), r(rng), 1 + r(rng)));
            }
            const KernelParams kp{0.3, 0.01, 0.1};
            const auto gp = JointGp::fit(d, kp);
            REQUIRE(gp.ok());
            CHECK(gp.jitter() == 0.0);
            oracle::LVec y;
            std::vector<oracle::LD> sc;
            for (std::size_t i = 0; i < n; ++i) {
                y.push_back(d.value_residuals[i]);
                if (grad) {
                    for (int a = 0; a < 3; ++a) y.push_back(d.gradient_residuals[i][a]);
                }
                sc.push_back(d.scales[i]);
            }
            const oracle::DenseGp o(d.points, sc, 0.3L, 0.01L, 0.1L, grad, y);
            oracle::LD worst = 0, norm = 0;
            for (std::size_t i = 0; i < o.alpha.size(); ++i) {
                worst = std::max(worst, std::fabs(gp.alpha()[static_cast<Eigen::Index>(i)] - o.alpha[i]));
                norm = std::max(norm, std::fabs(o.alpha[i]));
            }
            CHECK(worst / norm <= 1e-8);
            for (const auto &q : random_points(5, rng, 0.6)) {
                const auto p = gp.predict(q, 0.2);
                const auto [mo, vo] = o.predict(q, 0.2L);
                CHECK(oracle::rel_err(p.correction, mo, 1e-3) <= 1e-8);
                CHECK(oracle::rel_err(0.04 - p.reduction, vo, 1e-3) <= 1e-8);
            }
            // Batched and single predictions agree.
            const auto qs = random_points(300, rng, 0.6);
            std::vector<double> scs(qs.size(), 0.2);
            std::vector<JointGp::ValuePosterior> out(qs.size());
            gp.predict_batch(qs, scs, out);
            for (std::size_t i = 0; i < qs.size(); i += 37) {
                const auto p = gp.predict(qs[i], 0.2);
                CHECK(out[i].correction == doctest::Approx(p.correction).epsilon(1e-12));
                CHECK(out[i].reduction == doctest::Approx(p.reduction).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("JointGp jitter ladder rescues duplicated points") {
    GpTrainingData d;
    d.points.assign(30, Vec3(0.1, 0.2, 0.3));
    d.scales.assign(30, 1.0);
    d.value_residuals.assign(30, 0.0);
    d.gradient_residuals.assign(30, Vec3::UnitZ());
    // Tiny noise makes 30 copies numerically rank one.
    const auto gp = JointGp::fit(d, KernelParams{0.3, 1e-9, 1e-9});
    CHECK(gp.ok());
    CHECK(gp.jitter() > 0.0);
    CHECK(gp.jitter() <= JointGp::kMaxJitter);
}

TEST_CASE("training point selection") {
    const auto prior = affine_prior(Vec3::UnitZ(), 0.0, 0.01);  // m(x) = z
    OrientedPointCloud c;
    c.points = {Vec3(0, 0, 0.05), Vec3(0, 0, 0.01), Vec3(1, 1, -0.03)};
    c.normals.assign(3, Vec3::UnitZ());
    const auto sel = select_training_points(*prior, c, 0.02, 8);
    REQUIRE(sel.size() == 2);
    CHECK(sel.points[0] == c.points[0]);
    CHECK(sel.points[1] == c.points[2]);
    CHECK(sel.normals.size() == 2);
    CHECK_THROWS_AS(select_training_points(*prior, c, 0.0, 8), ArgumentError);

    std::mt19937_64 rng(4);
    const auto plane = sample_surface(ShapeSpec{Plane{Vec3::Zero(), Vec3::UnitZ(), 1.0}}, 800, 0.0, rng);
    const HgmmModel fitted = fit_hgmm(augment_virtual_points(plane, 0.2), HgmmConfig{});
    const auto fsel = select_training_points(fitted, plane, 0.05, 8);
    CHECK(double(fsel.size()) / double(plane.size()) < 0.1);
}

TEST_CASE("octree blocks") {
    std::vector<Vec3> corners;
    for (int i = 0; i < 8; ++i) corners.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    const auto l8 = build_blocks(corners, 1, 0.0, Box::bounding(corners));
    CHECK(l8.block_count() == 8);
    for (const auto &o : l8.owned) CHECK(o.size() == 1);

    const auto l1 = build_blocks(corners, 8, 0.5, Box::bounding(corners));
    CHECK(l1.block_count() == 1);
    CHECK(l1.owned[0].size() == 8);
    CHECK(l1.context[0].empty());

    std::mt19937_64 rng(5);
    const auto pts = random_points(2000, rng, 2.0);
    const Box bounds = Box::bounding(pts);
    const auto l = build_blocks(pts, 300, 0.5, bounds);
    std::vector<int> seen(pts.size(), 0);
    for (const auto &node : l.nodes) {
        if (!node.is_leaf()) continue;
        const auto b = static_cast<std::size_t>(node.block);
        CHECK(l.owned[b].size() <= 300);
        const std::set<std::size_t> own(l.owned[b].begin(), l.owned[b].end());
        for (auto i : l.owned[b]) {
            ++seen[i];
            CHECK(node.box.contains(pts[i]));
        }
        for (auto i : l.context[b]) {
            CHECK(node.box.distance(pts[i]) <= 0.5);
            CHECK(own.count(i) == 0);
        }
        // Exhaustive: every non-owned point within the halo is context.
        std::size_t want = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) want += !own.count(i) && node.box.distance(pts[i]) <= 0.5;
        CHECK(l.context[b].size() == want);
        CHECK(l.locate(node.box.center()) == &node - l.nodes.data());
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    const auto again = build_blocks(pts, 300, 0.5, bounds);
    CHECK(again.owned == l.owned);
    CHECK(again.context == l.context);

    std::vector<Vec3> dup(20, Vec3(0.5, 0.5, 0.5));
    dup.emplace_back(0, 0, 0);
    dup.emplace_back(1, 1, 1);
    const auto ld = build_blocks(dup, 4, 0.0, Box::bounding(dup));
    CHECK_FALSE(ld.log.empty());
    int deepest = 0;
    for (const auto &n : ld.nodes) deepest = std::max(deepest, n.depth);
    CHECK(deepest == 12);
    CHECK_THROWS_AS(build_blocks(dup, 0, 0.0, Box::bounding(dup)), ArgumentError);
}

TEST_CASE("fit_block: one point interpolates with tiny noise") {
    const auto prior = affine_prior(Vec3::Zero(), 0.3, 0.04);
    GpFieldConfig cfg;
    cfg.kernel = {0.3, 1e-6, 1e-6};
    const auto f = single_block_field(prior, {Vec3(0.1, 0.2, 0.3)}, {Vec3::UnitZ()}, cfg);
    CHECK(std::abs(f.predict(Vec3(0.1, 0.2, 0.3)).mean) <= 1e-6);
}

TEST_CASE("fit_block: zero residuals keep the prior") {
    const auto prior = affine_prior(Vec3::UnitZ(), 0.0, 0.01);  // already the plane's SDF
    std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0.2, 0, 0), Vec3(0, 0.2, 0), Vec3(0.1, 0.3, 0)};
    GpFieldConfig cfg;
    const auto f = single_block_field(prior, pts, std::vector<Vec3>(4, Vec3::UnitZ()), cfg);
    CHECK(f.blocks()[0].gp.alpha().cwiseAbs().maxCoeff() < 1e-9);
    std::mt19937_64 rng(6);
    for (const auto &q : random_points(20, rng)) {
        CHECK(std::abs(f.predict(q).mean - regress(*prior, q, 8).mean) < 1e-9);
    }
}

TEST_CASE("fit_block: weights match a dense solve") {
    std::mt19937_64 rng(7);
    const auto prior = std::make_shared<const HgmmModel>(testutil::random_model(4, rng, 0.5));
    auto pts = random_points(10, rng, 0.4);
    std::vector<Vec3> nrm;
    for (const auto &p : pts) nrm.push_back(p.normalized());
    GpFieldConfig cfg;
    const auto b = fit_block(Box::bounding(pts), pts, nrm, std::vector<std::uint8_t>(10, 1), *prior, cfg);
    REQUIRE(b.gp.ok());
    oracle::LVec y;
    std::vector<oracle::LD> sc;
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(b.prior_means[i] == regress(*prior, pts[i], cfg.active).mean);
        y.push_back(0.0L - b.prior_means[i]);
        for (int a = 0; a < 3; ++a) y.push_back(oracle::LD(nrm[i][a]) - b.prior_grad_means[i][a]);
        sc.push_back(b.prior_scales[i]);
    }
    const oracle::DenseGp o(pts, sc, 0.3L, 0.01L, 0.1L, true, y);
    oracle::LD worst = 0, norm = 0;
    for (std::size_t i = 0; i < o.alpha.size(); ++i) {
        worst = std::max(worst, std::fabs(b.gp.alpha()[static_cast<Eigen::Index>(i)] - o.alpha[i]));
        norm = std::max(norm, std::fabs(o.alpha[i]));
    }
    CHECK(worst / norm <= 1e-8);
    CHECK_THROWS_AS(fit_block(Box{}, {}, {}, {}, *prior, cfg), ArgumentError);
}

TEST_CASE("field prediction properties") {
    std::mt19937_64 rng(8);
    const auto prior = std::make_shared<const HgmmModel>(testutil::random_model(4, rng, 0.5));
    auto pts = random_points(15, rng, 0.4);
    std::vector<Vec3> nrm;
    for (const auto &p : pts) nrm.push_back(p.normalized());
    GpFieldConfig cfg;
    const auto f = single_block_field(prior, pts, nrm, cfg);
    const double nv = cfg.kernel.value_noise * cfg.kernel.value_noise;

    // Far from the data the prior comes back.
    const Vec3 far(8, -7, 9);  // > 20 l from every point
    const auto pf = f.predict(far);
    const auto g = regress(*prior, far, cfg.active);
    const double sp = std::max(std::sqrt(g.variance), cfg.sigma_floor);
    CHECK(std::abs(pf.mean - g.mean) <= 1e-9);
    CHECK(std::abs(pf.variance - (sp * sp + nv)) <= 1e-9);

    // Posterior variance bounded by prior + noise, and by noise from below.
    for (const auto &q : random_points(200, rng, 0.8)) {
        const auto p = f.predict(q);
        const auto gq = regress(*prior, q, cfg.active);
        const double s = std::max(std::sqrt(gq.variance), cfg.sigma_floor);
        CHECK(p.variance <= s * s + nv + 1e-9);
        CHECK(p.variance >= nv - 1e-12);
    }

    // Permuting the training points changes nothing.
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vec3> pp, pn;
    for (auto i : perm) {
        pp.push_back(pts[i]);
        pn.push_back(nrm[i]);
    }
    const auto fp = single_block_field(prior, pp, pn, cfg);
    for (const auto &q : random_points(50, rng, 0.6)) {
        CHECK(std::abs(fp.predict(q).mean - f.predict(q).mean) < 1e-10);
        CHECK(std::abs(fp.predict(q).variance - f.predict(q).variance) < 1e-10);
    }

    std::vector<FieldPrediction> batch(pts.size());
    f.predict_batch(pts, batch);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(batch[i].mean == doctest::Approx(f.predict(pts[i]).mean).epsilon(1e-12));
    }
    CHECK_THROWS_AS((void)GpFieldModel().predict(Vec3::Zero()), StateError);
}

TEST_CASE("field with a flat prior is a textbook stationary GP") {
    // Sigma_XY = 0 and mu_Y = 0: m = 0, sigma_p constant.
    const auto prior = affine_prior(Vec3::Zero(), 0.0, 0.09);
    std::mt19937_64 rng(9);
    auto pts = random_points(12, rng, 0.4);
    std::vector<Vec3> nrm;
    for (const auto &p : pts) nrm.push_back(p.normalized());
    GpFieldConfig cfg;
    const auto f = single_block_field(prior, pts, nrm, cfg);
    oracle::LVec y;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        y.push_back(0);
        for (int a = 0; a < 3; ++a) y.push_back(nrm[i][a]);
    }
    const oracle::DenseGp o(pts, std::vector<oracle::LD>(pts.size(), 0.3L), 0.3L, 0.01L, 0.1L, true, y);
    for (const auto &q : random_points(30, rng, 0.6)) {
        const auto p = f.predict(q);
        const auto [m, v] = o.predict(q, 0.3L);
        CHECK(oracle::rel_err(p.mean, m, 1e-3) <= 1e-8);
        CHECK(oracle::rel_err(p.variance, v + 1e-4L, 1e-3) <= 1e-8);
    }
}

TEST_CASE("three plane points recover an off-plane distance") {
    // Zero prior mean: the off-plane value comes from the normals alone. A
    // Matern-3/2 field relaxes towards the prior over about one length scale,
    // so the 0.02 tolerance needs l well above the 0.1 offset.
    const auto prior = affine_prior(Vec3::Zero(), 0.0, 0.04);
    const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0, 0.1, 0)};
    const std::vector<Vec3> normals(3, Vec3::UnitZ());
    const Vec3 q(0.03, 0.03, 0.1);
    GpFieldConfig cfg;
    cfg.kernel.length_scale = 1.0;
    CHECK(std::abs(single_block_field(prior, pts, normals, cfg).predict(q).mean - 0.1) <= 0.02);
    cfg.kernel.length_scale = 0.3;
    const double short_scale = single_block_field(prior, pts, normals, cfg).predict(q).mean;
    CHECK(short_scale > 0.05);
    CHECK(short_scale < 0.1);
    cfg.kernel.value_noise = 1e-5;
    const auto g = single_block_field(prior, pts, normals, cfg);
    CHECK(std::abs(g.predict(pts[1]).mean) <= 1e-3);
}

TEST_CASE("fit_gp_field on a sphere") {
    std::mt19937_64 rng(10);
    const ShapeSpec sphere{Sphere{}};
    const auto c = sample_surface(sphere, 1500, 0.0, rng);
    const auto prior = std::make_shared<const HgmmModel>(fit_hgmm(augment_virtual_points(c, 0.2), HgmmConfig{}));
    GpFieldConfig cfg;
    cfg.block_capacity = 200;
    GpFieldFitStats stats;
    const auto f = fit_gp_field(prior, c, cfg, &stats);
    CHECK(stats.input_points == 1500);
    CHECK(stats.selected_points < 1500);
    CHECK(stats.blocks == f.blocks().size());
    CHECK(stats.prior_only_blocks == 0);
    std::size_t owned = 0;
    for (const auto &b : f.blocks()) {
        for (auto o : b.owned) owned += o;
    }
    CHECK(owned == stats.selected_points);
    double worst = 0.0;
    for (const auto &p : sample_surface(sphere, 200, 0.0, rng).points) worst = std::max(worst, std::abs(f.predict(p).mean));
    CHECK(worst < 0.05);

    // Nothing exceeds d_m: the prior stands alone.
    cfg.discrepancy = 10.0;
    const auto alone = fit_gp_field(prior, c, cfg, &stats);
    CHECK(stats.selected_points == 0);
    const Vec3 q(0.3, 0.2, 0.9);
    const auto g = regress(*prior, q, cfg.active);
    CHECK(alone.predict(q).mean == g.mean);
    CHECK(alone.predict(q).variance == doctest::Approx(g.variance + 1e-4));
}
