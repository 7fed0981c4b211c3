#include "gpgmm/surface.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <istream>

namespace gpgmm {

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
constexpr char kGridMagic[8] = {'G', 'P', 'G', 'M', 'M', 'G', 'R', 'D'};
constexpr std::uint32_t kGridVersion = 1;

std::string format_point(const Vec3 &p) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "(%.6g, %.6g, %.6g)", p.x(), p.y(), p.z());
    return buf;
}

template <class T>
void put(std::ostream &out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char *>(b), sizeof(T));
}

template <class T>
T get(std::istream &in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char *>(b), sizeof(T))) throw ParseError("truncated grid file", 0);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace

void ScalarGrid::validate() const {
    for (auto d : dims) {
        if (d < 2) throw ArgumentError("grid needs at least 2 nodes per axis");
    }
    if (!(spacing > 0.0)) throw ArgumentError("grid spacing must be > 0");
    if (values.size() != size() || variances.size() != size()) throw ArgumentError("grid arrays do not match dims");
}

bool TriangleMesh::watertight() const {
    std::map<std::pair<std::size_t, std::size_t>, int> count;
    for (const auto &t : triangles) {
        for (int e = 0; e < 3; ++e) {
            auto a = t[static_cast<std::size_t>(e)], b = t[static_cast<std::size_t>((e + 1) % 3)];
            if (a > b) std::swap(a, b);
            ++count[{a, b}];
        }
    }
    for (const auto &[edge, c] : count) {
        if (c != 2) return false;
    }
    return true;
}

std::array<std::size_t, 3> grid_dims(const Box &bounds, double spacing) {
    if (!(spacing > 0.0)) throw ArgumentError("grid spacing must be > 0");
    std::array<std::size_t, 3> dims{};
    for (int a = 0; a < 3; ++a) {
        const double ext = bounds.max[a] - bounds.min[a];
        if (!(ext > 0.0)) throw ArgumentError("grid bounds are degenerate");
        // The tolerance keeps 2 / 0.05 from landing on 39.999...
        dims[static_cast<std::size_t>(a)] = static_cast<std::size_t>(std::floor(ext / spacing + 1e-9)) + 1;
    }
    return dims;
}

ScalarGrid sample_grid(const BatchField &field, const Box &bounds, double spacing) {
    ScalarGrid g;
    g.dims = grid_dims(bounds, spacing);
    g.origin = bounds.min;
    g.spacing = spacing;
    g.values.resize(g.size());
    g.variances.resize(g.size());
    const std::size_t slab = g.dims[0] * g.dims[1];
    std::vector<Vec3> xs(slab);
    std::vector<FieldPrediction> out(slab);
    for (std::size_t k = 0; k < g.dims[2]; ++k) {
        for (std::size_t j = 0; j < g.dims[1]; ++j) {
            for (std::size_t i = 0; i < g.dims[0]; ++i) xs[i + g.dims[0] * j] = g.node(i, j, k);
        }
        try {
            field(xs, out);
        } catch (const Error &e) {
            // Find the first failing node so the message can name it.
            for (const auto &x : xs) {
                FieldPrediction one;
                try {
                    field(std::span<const Vec3>(&x, 1), std::span<FieldPrediction>(&one, 1));
                } catch (const Error &inner) {
                    throw Error("field query failed at " + format_point(x) + ": " + inner.what());
                }
            }
            throw Error(std::string("field query failed in slab ") + std::to_string(k) + ": " + e.what());
        }
        for (std::size_t n = 0; n < slab; ++n) {
            if (!std::isfinite(out[n].mean) || !std::isfinite(out[n].variance)) {
                throw Error("field query is not finite at " + format_point(xs[n]));
            }
            g.values[k * slab + n] = out[n].mean;
            g.variances[k * slab + n] = out[n].variance;
        }
    }
    return g;
}

TriangleMesh marching_cubes(const ScalarGrid &grid, double iso) {
    grid.validate();
    for (double v : grid.values) {
        if (!std::isfinite(v)) throw ArgumentError("grid holds non-finite values");
    }
    TriangleMesh mesh;
    // Key of the grid edge leaving node n along axis a is 3 n + a.
    std::vector<std::int64_t> vertex_of(3 * grid.size(), -1);
    const auto &d = grid.dims;
    for (std::size_t k = 0; k + 1 < d[2]; ++k) {
        for (std::size_t j = 0; j + 1 < d[1]; ++j) {
            for (std::size_t i = 0; i + 1 < d[0]; ++i) {
                std::size_t node[8];
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    node[c] = grid.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
                    if (grid.values[node[c]] < iso) cube |= 1 << c;
                }
                if (cube == 0 || cube == 255) continue;
                const int *tri = mc::kTriTable[cube];
                for (int t = 0; tri[t] >= 0; t += 3) {
                    std::array<std::size_t, 3> face{};
                    for (int v = 0; v < 3; ++v) {
                        int c0 = kEdge[tri[t + v]][0], c1 = kEdge[tri[t + v]][1];
                        if (node[c0] > node[c1]) std::swap(c0, c1);
                        int axis = 0;
                        while (kCorner[c0][axis] == kCorner[c1][axis]) ++axis;
                        auto &slot = vertex_of[3 * node[c0] + static_cast<std::size_t>(axis)];
                        if (slot < 0) {
                            const double va = grid.values[node[c0]], vb = grid.values[node[c1]];
                            const double s = (iso - va) / (vb - va);
                            const Vec3 pa = grid.node(i + kCorner[c0][0], j + kCorner[c0][1], k + kCorner[c0][2]);
                            const Vec3 pb = grid.node(i + kCorner[c1][0], j + kCorner[c1][1], k + kCorner[c1][2]);
                            slot = static_cast<std::int64_t>(mesh.vertices.size());
                            mesh.vertices.push_back(pa + s * (pb - pa));
                            mesh.vertex_variance.push_back(grid.variances[node[c0]] +
                                                           s * (grid.variances[node[c1]] - grid.variances[node[c0]]));
                        }
                        face[static_cast<std::size_t>(v)] = static_cast<std::size_t>(slot);
                    }
                    mesh.triangles.push_back(face);
                }
            }
        }
    }
    return mesh;
}

void write_mesh_ply(std::ostream &out, const TriangleMesh &mesh) {
    out << "ply\nformat ascii 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\nproperty float variance\n"
        << "element face " << mesh.triangles.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    char buf[160];
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const auto &v = mesh.vertices[i];
        std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %.9g\n", v.x(), v.y(), v.z(), mesh.vertex_variance[i]);
        out << buf;
    }
    for (const auto &t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_mesh_ply(const std::filesystem::path &path, const TriangleMesh &mesh) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_mesh_ply(out, mesh);
    if (!out) throw Error("failed writing " + path.string());
}

void write_grid(std::ostream &out, const ScalarGrid &grid) {
    grid.validate();
    out.write(kGridMagic, sizeof kGridMagic);
    put(out, kGridVersion);
    for (int a = 0; a < 3; ++a) put(out, grid.origin[a]);
    put(out, grid.spacing);
    for (auto n : grid.dims) put(out, static_cast<std::uint64_t>(n));
    for (double v : grid.values) put(out, v);
    for (double v : grid.variances) put(out, v);
}

ScalarGrid read_grid(std::istream &in) {
    char magic[sizeof kGridMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kGridMagic, sizeof magic) != 0) {
        throw ParseError("not a grid file", 0);
    }
    if (get<std::uint32_t>(in) != kGridVersion) throw ParseError("unsupported grid version", 0);
    ScalarGrid g;
    for (int a = 0; a < 3; ++a) g.origin[a] = get<double>(in);
    g.spacing = get<double>(in);
    for (auto &n : g.dims) n = static_cast<std::size_t>(get<std::uint64_t>(in));
    g.values.resize(g.size());
    g.variances.resize(g.size());
    for (auto &v : g.values) v = get<double>(in);
    for (auto &v : g.variances) v = get<double>(in);
    g.validate();
    return g;
}

}  // namespace gpgmm
