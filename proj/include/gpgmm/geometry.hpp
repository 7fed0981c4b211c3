#pragma once

#include "gpgmm/common.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace gpgmm {

/// Surface hits with optional unit normals. A zero normal marks a point whose
/// normal could not be estimated; such points are skipped downstream.
struct OrientedPointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // empty, or one per point
    std::optional<Vec3> viewpoint;

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] bool empty() const { return points.empty(); }
    [[nodiscard]] bool has_normals() const { return !normals.empty(); }
    [[nodiscard]] bool normal_valid(std::size_t i) const {
        return has_normals() && normals[i].squaredNorm() > 0.0;
    }

    /// Throws ArgumentError if normals are present but inconsistent.
    void validate() const;
    /// Copy holding only the listed indices (normals carried along).
    [[nodiscard]] OrientedPointCloud select(const std::vector<std::size_t> &indices) const;
    /// Copy without points flagged with a null normal.
    [[nodiscard]] OrientedPointCloud with_valid_normals() const;
};

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

struct AxisBox {
    Vec3 min = -Vec3::Ones();
    Vec3 max = Vec3::Ones();
};

/// Infinite plane through `point`. `extent` is the half-size of the square
/// patch used when sampling points on it.
struct Plane {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    double extent = 1.0;
};

struct ShapeSpec;

struct ShapeUnion {
    std::vector<ShapeSpec> members;
};

/// Ground-truth scene geometry with an analytic signed distance.
struct ShapeSpec {
    std::variant<Sphere, AxisBox, Plane, ShapeUnion> shape;

    void validate() const;
    /// Text form, e.g. "sphere:0,0,0,1" or "box:-1,-1,-1,1,1,1;sphere:3,0,0,0.5".
    [[nodiscard]] std::string to_string() const;
    static ShapeSpec parse(const std::string &text);
    /// Bounding box of the sampled surface.
    [[nodiscard]] Box bounds() const;
};

/// Signed distance: negative inside, zero on the surface, positive outside.
/// Unions take the member minimum (exact for disjoint members).
double analytic_sdf(const ShapeSpec &shape, const Vec3 &x);

/// Unit gradient of the analytic SDF at x (outward surface normal on the surface).
Vec3 analytic_normal(const ShapeSpec &shape, const Vec3 &x);

/// Surface area used to spread samples over union members and box faces.
double surface_area(const ShapeSpec &shape);

/// Uniform-by-area surface samples with analytic normals. Gaussian position
/// noise (std `noise`) is applied after the normal is taken.
OrientedPointCloud sample_surface(const ShapeSpec &shape, std::size_t n, double noise,
                                  std::mt19937_64 &rng);

}  // namespace gpgmm
