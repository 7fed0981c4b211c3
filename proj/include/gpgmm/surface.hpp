#pragma once

#include "gpgmm/common.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace gpgmm {

/// Anything that answers batched field queries.
using BatchField = std::function<void(std::span<const Vec3>, std::span<FieldPrediction>)>;

/// Regular lattice of field samples. Node (i, j, k) sits at
/// origin + spacing * (i, j, k) and is stored at i + dims[0] (j + dims[1] k).
struct ScalarGrid {
    Vec3 origin = Vec3::Zero();
    double spacing = 1.0;
    std::array<std::size_t, 3> dims{0, 0, 0};
    std::vector<double> values;
    std::vector<double> variances;

    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + dims[0] * (j + dims[1] * k);
    }
    [[nodiscard]] Vec3 node(std::size_t i, std::size_t j, std::size_t k) const {
        return origin + spacing * Vec3(double(i), double(j), double(k));
    }
    [[nodiscard]] std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
    void validate() const;
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::size_t, 3>> triangles;
    std::vector<double> vertex_variance;

    [[nodiscard]] bool empty() const { return triangles.empty(); }
    /// True when every undirected edge is shared by exactly two triangles.
    [[nodiscard]] bool watertight() const;
};

/// Nodes per axis: floor(extent / spacing) + 1.
std::array<std::size_t, 3> grid_dims(const Box &bounds, double spacing);

/// Evaluates the field at every node, one z-slab per batch.
ScalarGrid sample_grid(const BatchField &field, const Box &bounds, double spacing);

/// Zero-crossing surface by marching cubes with linear edge interpolation.
/// Vertices on shared edges are emitted once, in order of first use.
TriangleMesh marching_cubes(const ScalarGrid &grid, double iso = 0.0);

/// ASCII PLY with x, y, z and a per-vertex "variance" property.
void write_mesh_ply(std::ostream &out, const TriangleMesh &mesh);
void write_mesh_ply(const std::filesystem::path &path, const TriangleMesh &mesh);

/// Binary grid: "GPGMMGRD", u32 version, origin (3 f64), spacing (f64),
/// dims (3 u64), values, variances; all little-endian.
void write_grid(std::ostream &out, const ScalarGrid &grid);
ScalarGrid read_grid(std::istream &in);

namespace mc {
extern const int kTriTable[256][16];
}

}  // namespace gpgmm
