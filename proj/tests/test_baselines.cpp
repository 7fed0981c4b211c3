#include "oracles.hpp"

#include <gpgmm/baselines.hpp>
#include <gpgmm/geometry.hpp>

#include <doctest.h>

#include <cmath>

using namespace gpgmm;

namespace {

OrientedPointCloud sphere_cloud(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_surface(ShapeSpec{Sphere{}}, n, 0.0, rng);
}

}  // namespace

TEST_CASE("log transform") {
    CHECK(loggpis_distance(1.0, 0.1) == 0.0);
    CHECK(loggpis_distance(std::exp(-std::sqrt(3.0)), 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(loggpis_distance(0.0, 0.1) == 2.0);
    CHECK(loggpis_distance(-0.5, 0.1, 3.0) == 3.0);
    CHECK(loggpis_distance(1e-13, 0.1) == 2.0);
    CHECK(loggpis_distance(1.5, 0.1) == 0.0);  // overshoot clamps to the surface
    CHECK(loggpis_distance(1e-40, 1.0, 5.0) == 5.0);
    CHECK_THROWS_AS(loggpis_distance(0.5, 0.0), ArgumentError);

    CHECK(loggpis_variance(0.01, 1.0, std::sqrt(3.0)) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(loggpis_variance(0.0, 0.3, 0.1) == 0.0);
    CHECK(loggpis_variance(0.01, 0.2, 0.1) > loggpis_variance(0.01, 0.4, 0.1));
}

TEST_CASE("GPIS far field and interpolation") {
    const auto c = sphere_cloud(60, 1);
    KernelParams kp{0.3, 0.01, 0.1};
    const auto m = gpis_fit(c, kp);
    const Vec3 far(7, 0, 0);  // 6 m = 20 l from the surface
    const auto p = m.predict(far);
    CHECK(std::abs(p.mean - 0.2) <= 1e-9);
    CHECK(std::abs(p.variance - (1.0 + 1e-4)) <= 1e-6);

    const auto tight = gpis_fit(c, KernelParams{0.3, 1e-5, 0.1});
    CHECK(std::abs(tight.predict(c.points[3]).mean) <= 1e-3);

    OrientedPointCloud no_normals;
    no_normals.points = c.points;
    CHECK_THROWS_AS(gpis_fit(no_normals, kp), ArgumentError);
}

TEST_CASE("GPIS matches a dense solve") {
    const auto c = sphere_cloud(10, 2);
    const KernelParams kp{0.3, 0.01, 0.1};
    const auto m = gpis_fit(c, kp);
    oracle::LVec y;
    for (std::size_t i = 0; i < c.size(); ++i) {
        y.push_back(-0.2L);
        for (int a = 0; a < 3; ++a) y.push_back(c.normals[i][a]);
    }
    const oracle::DenseGp o(c.points, std::vector<oracle::LD>(c.size(), 1.0L), 0.3L, 0.01L, 0.1L, true, y);
    oracle::LD worst = 0, norm = 0;
    for (std::size_t i = 0; i < o.alpha.size(); ++i) {
        worst = std::max(worst, std::fabs(m.gp().alpha()[static_cast<Eigen::Index>(i)] - o.alpha[i]));
        norm = std::max(norm, std::fabs(o.alpha[i]));
    }
    CHECK(worst / norm <= 1e-8);
    for (const auto &q : {Vec3(0.5, 0.5, 0.5), Vec3(1.2, 0, 0), Vec3(0, -0.9, 0.2)}) {
        const auto [mo, vo] = o.predict(q, 1.0L);
        CHECK(oracle::rel_err(m.predict(q).mean, 0.2L + mo) <= 1e-8);
        CHECK(oracle::rel_err(m.predict(q).variance, vo + 1e-4L) <= 1e-8);
    }
}

TEST_CASE("Log-GPIS matches a dense solve and saturates far away") {
    const auto c = sphere_cloud(10, 3);
    const KernelParams kp{0.1, 0.01, 0.1};
    const auto m = loggpis_fit(c, kp);
    const oracle::DenseGp o(c.points, std::vector<oracle::LD>(c.size(), 1.0L), 0.1L, 0.01L, 0.1L, false,
                            oracle::LVec(c.size(), 1.0L));
    oracle::LD worst = 0, norm = 0;
    for (std::size_t i = 0; i < o.alpha.size(); ++i) {
        worst = std::max(worst, std::fabs(m.gp().alpha()[static_cast<Eigen::Index>(i)] - o.alpha[i]));
        norm = std::max(norm, std::fabs(o.alpha[i]));
    }
    CHECK(worst / norm <= 1e-8);
    const Vec3 q = c.points[0] * 1.05;
    const auto [vo, vv] = o.predict(q, 1.0L);
    CHECK(oracle::rel_err(m.predict_raw(q).mean, vo) <= 1e-8);
    CHECK(oracle::rel_err(m.predict(q).mean, -(0.1L / std::sqrt(3.0L)) * std::log(vo)) <= 1e-8);

    // On the surface the heat value is ~1 and the distance ~0.
    const auto tight = loggpis_fit(c, KernelParams{0.1, 1e-4, 0.1});
    CHECK(std::abs(tight.predict_raw(c.points[2]).mean - 1.0) < 1e-3);
    CHECK(tight.predict(c.points[2]).mean < 1e-3);

    const auto far = m.predict(Vec3(7, 0, 0));
    CHECK(far.mean == 2.0);
    CHECK(std::isfinite(far.variance));
}

TEST_CASE("baseline variance never exceeds prior plus noise") {
    const auto c = sphere_cloud(200, 4);
    const auto g = gpis_fit(c, KernelParams{0.3, 0.01, 0.1});
    const auto l = loggpis_fit(c, KernelParams{0.1, 0.01, 0.1});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int t = 0; t < 200; ++t) {
        const Vec3 q(u(rng), u(rng), u(rng));
        CHECK(g.predict(q).variance <= 1.0 + 1e-4 + 1e-9);
        CHECK(l.predict_raw(q).variance <= 1.0 + 1e-4 + 1e-9);
    }
}
