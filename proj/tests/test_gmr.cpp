#include "test_util.hpp"

#include <gpgmm/geometry.hpp>
#include <gpgmm/gmr.hpp>

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace gpgmm;
using testutil::random_model;

namespace {

HgmmModel single(const Gaussian4 &g) {
    Gaussian4 c = g;
    c.weight = 1.0;
    return HgmmModel({c}, {0}, HgmmConfig{});
}

}  // namespace

TEST_CASE("conditional at the spatial mean") {
    std::mt19937_64 rng(1);
    const auto g = Gaussian4::make(1.0, Vec4(1, 2, 3, 0.4), testutil::random_spd(rng));
    CHECK(conditional(g, Vec3(1, 2, 3)).mean == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("conditional: two-dimensional Schur example embedded in 4D") {
    Mat4 cov = Mat4::Identity();
    cov(0, 3) = cov(3, 0) = 0.5;
    const auto g = Gaussian4::make(1.0, Vec4::Zero(), cov);
    const auto c = conditional(g, Vec3(1, 0, 0));
    CHECK(c.mean == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(c.variance == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("conditional: independent distance") {
    Mat4 cov = Mat4::Zero();
    cov.diagonal() << 2, 3, 4, 0.25;
    cov(0, 1) = cov(1, 0) = 0.5;
    const auto g = Gaussian4::make(1.0, Vec4(0, 0, 0, -1), cov);
    for (const auto &x : {Vec3(1, 2, 3), Vec3(-5, 0, 9)}) {
        const auto c = conditional(g, x);
        CHECK(c.mean == doctest::Approx(-1.0));
        CHECK(c.variance == doctest::Approx(0.25));
    }
}

TEST_CASE("conditional matches the Schur complement form") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int t = 0; t < 200; ++t) {
        const auto g = Gaussian4::make(1.0, Vec4(u(rng), u(rng), u(rng), u(rng)), testutil::random_spd(rng));
        const Vec3 x(u(rng), u(rng), u(rng));
        const auto c = conditional(g, x);
        const auto [m, v] = oracle::schur_conditional(testutil::to_oracle(g), x);
        CHECK(oracle::rel_err(c.mean, m) <= 1e-9);
        CHECK(oracle::rel_err(c.variance, v) <= 1e-9);
    }
}

TEST_CASE("select_active") {
    std::mt19937_64 rng(3);
    const auto m = random_model(6, rng);
    auto all = select_active(m, Vec3::Zero(), 10);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});

    Mat4 cov = Mat4::Identity();
    const HgmmModel two({Gaussian4::make(0.5, Vec4(0, 0, 0, 0), cov), Gaussian4::make(0.5, Vec4(10, 0, 0, 0), cov)},
                        {0, 0}, HgmmConfig{});
    CHECK(select_active(two, Vec3(0.1, 0, 0), 1) == std::vector<std::size_t>{0});
    // Exact tie: equidistant query picks the lower index.
    CHECK(select_active(two, Vec3(5, 0, 0), 1) == std::vector<std::size_t>{0});
}

TEST_CASE("select_active matches an exhaustive density ranking") {
    std::mt19937_64 rng(4);
    const auto m = random_model(20, rng);
    const auto oc = testutil::to_oracle(m);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int t = 0; t < 100; ++t) {
        const Vec3 x(u(rng), u(rng), u(rng));
        std::vector<std::size_t> idx(20);
        std::iota(idx.begin(), idx.end(), 0);
        std::vector<oracle::LD> d(20);
        for (std::size_t k = 0; k < 20; ++k) d[k] = oracle::weighted_density(oc[k], x);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
        idx.resize(5);
        CHECK(select_active(m, x, 5) == idx);
    }
}

TEST_CASE("regress with a single leaf is the conditional") {
    std::mt19937_64 rng(5);
    const auto g = Gaussian4::make(1.0, Vec4(0.1, 0.2, 0.3, 0.4), testutil::random_spd(rng));
    const auto m = single(g);
    const Vec3 x(0.5, -1, 2);
    const auto p = regress(m, x, 8);
    const auto c = conditional(m.leaves()[0], x);
    CHECK(p.mean == doctest::Approx(c.mean).epsilon(1e-12));
    CHECK(p.variance == doctest::Approx(c.variance).epsilon(1e-12));
    CHECK(p.variance == doctest::Approx(1.0 / m.leaves()[0].precision(3, 3)).epsilon(1e-12));
    CHECK_THROWS(regress(HgmmModel{}, x, 1));
}

TEST_CASE("regress: symmetric pair weighs both halves equally") {
    Mat4 cov = Mat4::Identity();
    cov(0, 3) = cov(3, 0) = 0.3;
    const HgmmModel two({Gaussian4::make(0.5, Vec4(-1, 0, 0, 1), cov), Gaussian4::make(0.5, Vec4(1, 0, 0, -1), cov)},
                        {0, 0}, HgmmConfig{});
    const Vec3 x(0, 0.2, 0);
    const auto p = regress(two, x, 2);
    const double m0 = conditional(two.leaves()[0], x).mean, m1 = conditional(two.leaves()[1], x).mean;
    CHECK(p.mean == doctest::Approx(0.5 * m0 + 0.5 * m1).epsilon(1e-15));
}

TEST_CASE("regress matches the extended-precision mixture") {
    std::mt19937_64 rng(6);
    const auto m = random_model(5, rng);
    const auto oc = testutil::to_oracle(m);
    std::uniform_real_distribution<double> u(-2, 2);
    oracle::LD worst = 0;
    for (int t = 0; t < 100; ++t) {
        const Vec3 x(u(rng), u(rng), u(rng));
        const auto p = regress(m, x, 5);
        const auto [om, ov] = oracle::gmr(oc, x);
        worst = std::max({worst, oracle::rel_err(p.mean, om), oracle::rel_err(p.variance, ov)});
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("regress variance is non-negative and weights normalize") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-4, 4);
    for (int t = 0; t < 20; ++t) {
        const auto m = random_model(12, rng);
        for (int q = 0; q < 50; ++q) {
            const Vec3 x(u(rng), u(rng), u(rng));
            for (std::size_t j : {1u, 3u, 8u, 12u}) {
                const auto p = regress(m, x, j);
                CHECK(p.variance >= -1e-12);
                CHECK(std::isfinite(p.mean));
            }
        }
    }
}

TEST_CASE("regress with all leaves equals regress_with all leaves; J < K is reported") {
    std::mt19937_64 rng(8);
    const auto m = random_model(10, rng);
    std::vector<std::size_t> all(10);
    std::iota(all.begin(), all.end(), 0);
    std::uniform_real_distribution<double> u(-2, 2);
    double max_gap = 0.0;
    for (int t = 0; t < 50; ++t) {
        const Vec3 x(u(rng), u(rng), u(rng));
        const auto full = regress(m, x, 10);
        const auto same = regress_with(m, x, all);
        CHECK(full.mean == doctest::Approx(same.mean).epsilon(1e-13));
        max_gap = std::max(max_gap, std::abs(regress(m, x, 3).mean - full.mean));
    }
    MESSAGE("max |m_J=3 - m_full| over 50 queries: " << max_gap);
}

TEST_CASE("far field keeps the single surviving leaf") {
    std::mt19937_64 rng(9);
    const auto m = random_model(6, rng);
    const Vec3 far(1e3, -2e2, 5e2);
    const auto p = regress(m, far, 8);
    REQUIRE(std::isfinite(p.mean));
    REQUIRE(std::isfinite(p.variance));
    const auto top = select_active(m, far, 1)[0];
    CHECK(p.variance == doctest::Approx(1.0 / m.leaves()[top].precision(3, 3)).epsilon(1e-6));
    CHECK(p.underflow);
}

TEST_CASE("regress_gradient") {
    std::mt19937_64 rng(10);
    const auto g = Gaussian4::make(1.0, Vec4(0.1, 0.2, 0.3, 0.4), testutil::random_spd(rng));
    const auto m = single(g);
    const Mat4 &lam = m.leaves()[0].precision;
    const Vec3 analytic = -lam.block<1, 3>(3, 0).transpose() / lam(3, 3);
    for (const auto &x : {Vec3(0, 0, 0), Vec3(1, -1, 0.5)}) {
        const Vec3 fd = regress_gradient(m, x, 8, 1e-4);
        for (int i = 0; i < 3; ++i) CHECK(oracle::rel_err(fd[i], analytic[i], 1e-3) <= 1e-5);
    }

    // The second component mirrors the first, so the model is symmetric under x -> -x.
    Mat4 cov = Mat4::Identity();
    cov(0, 3) = cov(3, 0) = 0.3;
    Mat4 cov2 = cov;
    cov2(0, 3) = cov2(3, 0) = -0.3;
    const HgmmModel mirror({Gaussian4::make(0.5, Vec4(-1, 0, 0, 1), cov), Gaussian4::make(0.5, Vec4(1, 0, 0, 1), cov2)},
                           {0, 0}, HgmmConfig{});
    CHECK(regress_gradient(mirror, Vec3::Zero(), 2).norm() < 1e-8);
    CHECK_THROWS_AS(regress_gradient(m, Vec3::Zero(), 1, 0.0), ArgumentError);
}

TEST_CASE("regress_gradient on a fitted plane points along the normal") {
    std::mt19937_64 rng(11);
    const auto c = sample_surface(ShapeSpec{Plane{Vec3::Zero(), Vec3::UnitZ(), 1.0}}, 500, 0.0, rng);
    const auto m = fit_hgmm(augment_virtual_points(c, 0.2), HgmmConfig{});
    for (const auto &x : {Vec3(0, 0, 0.05), Vec3(0.3, -0.2, 0), Vec3(-0.5, 0.4, -0.1)}) {
        CHECK((regress_gradient(m, x, 8) - Vec3::UnitZ()).norm() < 0.05);
    }
}
