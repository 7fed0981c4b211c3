#include "gpgmm/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace gpgmm {

Box Box::bounding(const std::vector<Vec3> &points) {
    if (points.empty()) throw ArgumentError("bounding box of an empty point set");
    Box b{points.front(), points.front()};
    for (const auto &p : points) {
        b.min = b.min.cwiseMin(p);
        b.max = b.max.cwiseMax(p);
    }
    return b;
}

void OrientedPointCloud::validate() const {
    if (!normals.empty() && normals.size() != points.size()) {
        throw ArgumentError("cloud has " + std::to_string(points.size()) + " points but " +
                            std::to_string(normals.size()) + " normals");
    }
    for (std::size_t i = 0; i < normals.size(); ++i) {
        const double n = normals[i].norm();
        if (n != 0.0 && std::abs(n - 1.0) > 1e-6) {
            throw ArgumentError("normal " + std::to_string(i) + " is not unit length");
        }
    }
}

OrientedPointCloud OrientedPointCloud::select(const std::vector<std::size_t> &indices) const {
    OrientedPointCloud out;
    out.viewpoint = viewpoint;
    out.points.reserve(indices.size());
    if (has_normals()) out.normals.reserve(indices.size());
    for (auto i : indices) {
        out.points.push_back(points.at(i));
        if (has_normals()) out.normals.push_back(normals[i]);
    }
    return out;
}

OrientedPointCloud OrientedPointCloud::with_valid_normals() const {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < size(); ++i) {
        if (normal_valid(i)) keep.push_back(i);
    }
    return select(keep);
}

namespace {

template<class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

double box_sdf(const AxisBox &b, const Vec3 &x) {
    const Vec3 c = 0.5 * (b.min + b.max);
    const Vec3 h = 0.5 * (b.max - b.min);
    const Vec3 q = (x - c).cwiseAbs() - h;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

Vec3 box_normal(const AxisBox &b, const Vec3 &x) {
    const Vec3 c = 0.5 * (b.min + b.max);
    const Vec3 h = 0.5 * (b.max - b.min);
    const Vec3 d = x - c;
    const Vec3 q = d.cwiseAbs() - h;
    if (q.maxCoeff() > 0.0) {
        Vec3 g = q.cwiseMax(0.0);
        for (int i = 0; i < 3; ++i) g[i] = std::copysign(g[i], d[i]);
        return g.normalized();
    }
    Eigen::Index axis;
    q.maxCoeff(&axis);
    Vec3 g = Vec3::Zero();
    g[axis] = d[axis] >= 0.0 ? 1.0 : -1.0;
    return g;
}

void tangent_basis(const Vec3 &n, Vec3 &u, Vec3 &v) {
    const Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    u = n.cross(a).normalized();
    v = n.cross(u);
}

std::vector<double> parse_numbers(const std::string &s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        double v = 0.0;
        const auto *first = tok.data();
        const auto *last = tok.data() + tok.size();
        while (first < last && *first == ' ') ++first;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) throw ArgumentError("bad number '" + tok + "' in shape spec");
        out.push_back(v);
    }
    return out;
}

std::string join(const Vec3 &v) {
    std::ostringstream os;
    os.precision(17);
    os << v.x() << ',' << v.y() << ',' << v.z();
    return os.str();
}

}  // namespace

void ShapeSpec::validate() const {
    std::visit(Overloaded{
                   [](const Sphere &s) {
                       if (!(s.radius > 0.0)) throw ArgumentError("sphere radius must be > 0");
                   },
                   [](const AxisBox &b) {
                       if (!(b.min.array() < b.max.array()).all())
                           throw ArgumentError("box min must be < max componentwise");
                   },
                   [](const Plane &p) {
                       if (!(p.normal.norm() > 0.0)) throw ArgumentError("plane normal must be non-zero");
                       if (!(p.extent > 0.0)) throw ArgumentError("plane extent must be > 0");
                   },
                   [](const ShapeUnion &u) {
                       if (u.members.empty()) throw ArgumentError("empty shape union");
                       for (const auto &m : u.members) m.validate();
                   },
               },
               shape);
}

std::string ShapeSpec::to_string() const {
    return std::visit(Overloaded{
                          [](const Sphere &s) {
                              std::ostringstream os;
                              os.precision(17);
                              os << "sphere:" << join(s.center) << ',' << s.radius;
                              return os.str();
                          },
                          [](const AxisBox &b) { return "box:" + join(b.min) + ',' + join(b.max); },
                          [](const Plane &p) {
                              std::ostringstream os;
                              os.precision(17);
                              os << "plane:" << join(p.point) << ',' << join(p.normal) << ',' << p.extent;
                              return os.str();
                          },
                          [](const ShapeUnion &u) {
                              std::string s;
                              for (std::size_t i = 0; i < u.members.size(); ++i) {
                                  if (i) s += ';';
                                  s += u.members[i].to_string();
                              }
                              return s;
                          },
                      },
                      shape);
}

ShapeSpec ShapeSpec::parse(const std::string &text) {
    if (text.find(';') != std::string::npos) {
        ShapeUnion u;
        std::stringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ';')) {
            if (!part.empty()) u.members.push_back(parse(part));
        }
        ShapeSpec s{std::move(u)};
        s.validate();
        return s;
    }
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ArgumentError("shape spec needs 'kind:params': " + text);
    const std::string kind = text.substr(0, colon);
    const auto v = parse_numbers(text.substr(colon + 1));
    ShapeSpec s;
    if (kind == "sphere" && v.size() == 4) {
        s.shape = Sphere{{v[0], v[1], v[2]}, v[3]};
    } else if (kind == "box" && v.size() == 6) {
        s.shape = AxisBox{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
    } else if (kind == "plane" && (v.size() == 6 || v.size() == 7)) {
        Plane p{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v.size() == 7 ? v[6] : 1.0};
        if (p.normal.norm() > 0.0) p.normal.normalize();
        s.shape = p;
    } else {
        throw ArgumentError("unrecognised shape spec: " + text);
    }
    s.validate();
    return s;
}

Box ShapeSpec::bounds() const {
    return std::visit(Overloaded{
                          [](const Sphere &s) {
                              return Box{s.center.array() - s.radius, s.center.array() + s.radius};
                          },
                          [](const AxisBox &b) { return Box{b.min, b.max}; },
                          [](const Plane &p) {
                              Vec3 u, v;
                              tangent_basis(p.normal.normalized(), u, v);
                              const Vec3 r = p.extent * (u.cwiseAbs() + v.cwiseAbs());
                              return Box{p.point - r, p.point + r};
                          },
                          [](const ShapeUnion &u) {
                              Box b = u.members.front().bounds();
                              for (const auto &m : u.members) {
                                  const Box mb = m.bounds();
                                  b.min = b.min.cwiseMin(mb.min);
                                  b.max = b.max.cwiseMax(mb.max);
                              }
                              return b;
                          },
                      },
                      shape);
}

double analytic_sdf(const ShapeSpec &shape, const Vec3 &x) {
    return std::visit(Overloaded{
                          [&](const Sphere &s) { return (x - s.center).norm() - s.radius; },
                          [&](const AxisBox &b) { return box_sdf(b, x); },
                          [&](const Plane &p) { return p.normal.normalized().dot(x - p.point); },
                          [&](const ShapeUnion &u) {
                              double d = analytic_sdf(u.members.front(), x);
                              for (const auto &m : u.members) d = std::min(d, analytic_sdf(m, x));
                              return d;
                          },
                      },
                      shape.shape);
}

Vec3 analytic_normal(const ShapeSpec &shape, const Vec3 &x) {
    return std::visit(Overloaded{
                          [&](const Sphere &s) {
                              const Vec3 d = x - s.center;
                              return d.norm() > 0.0 ? Vec3(d.normalized()) : Vec3(Vec3::UnitZ());
                          },
                          [&](const AxisBox &b) { return box_normal(b, x); },
                          [&](const Plane &p) { return Vec3(p.normal.normalized()); },
                          [&](const ShapeUnion &u) {
                              std::size_t best = 0;
                              double d = analytic_sdf(u.members[0], x);
                              for (std::size_t i = 1; i < u.members.size(); ++i) {
                                  const double di = analytic_sdf(u.members[i], x);
                                  if (di < d) {
                                      d = di;
                                      best = i;
                                  }
                              }
                              return analytic_normal(u.members[best], x);
                          },
                      },
                      shape.shape);
}

double surface_area(const ShapeSpec &shape) {
    constexpr double pi = 3.14159265358979323846;
    return std::visit(Overloaded{
                          [](const Sphere &s) { return 4.0 * pi * s.radius * s.radius; },
                          [](const AxisBox &b) {
                              const Vec3 e = b.max - b.min;
                              return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
                          },
                          [](const Plane &p) { return 4.0 * p.extent * p.extent; },
                          [](const ShapeUnion &u) {
                              double a = 0.0;
                              for (const auto &m : u.members) a += surface_area(m);
                              return a;
                          },
                      },
                      shape.shape);
}

namespace {

Vec3 sample_point(const ShapeSpec &shape, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    return std::visit(
        Overloaded{
            [&](const Sphere &s) {
                Vec3 d;
                do {
                    d = Vec3(gauss(rng), gauss(rng), gauss(rng));
                } while (d.norm() < 1e-12);
                return Vec3(s.center + s.radius * d.normalized());
            },
            [&](const AxisBox &b) {
                const Vec3 e = b.max - b.min;
                const double areas[3] = {e.y() * e.z(), e.x() * e.z(), e.x() * e.y()};
                const double total = areas[0] + areas[1] + areas[2];
                double r = unif(rng) * total;
                int axis = 2;
                if (r < areas[0]) {
                    axis = 0;
                } else if (r < areas[0] + areas[1]) {
                    axis = 1;
                }
                Vec3 p(b.min.x() + unif(rng) * e.x(), b.min.y() + unif(rng) * e.y(),
                       b.min.z() + unif(rng) * e.z());
                p[axis] = unif(rng) < 0.5 ? b.min[axis] : b.max[axis];
                return p;
            },
            [&](const Plane &p) {
                Vec3 u, v;
                tangent_basis(p.normal.normalized(), u, v);
                const double a = (2.0 * unif(rng) - 1.0) * p.extent;
                const double c = (2.0 * unif(rng) - 1.0) * p.extent;
                return Vec3(p.point + a * u + c * v);
            },
            [&](const ShapeUnion &u) {
                const double total = surface_area(shape);
                for (;;) {
                    double r = unif(rng) * total;
                    std::size_t k = 0;
                    for (; k + 1 < u.members.size(); ++k) {
                        const double a = surface_area(u.members[k]);
                        if (r < a) break;
                        r -= a;
                    }
                    const Vec3 p = sample_point(u.members[k], rng);
                    // Hidden by another member: not on the union surface.
                    if (std::abs(analytic_sdf(shape, p)) <= 1e-9) return p;
                }
            },
        },
        shape.shape);
}

}  // namespace

OrientedPointCloud sample_surface(const ShapeSpec &shape, std::size_t n, double noise,
                                  std::mt19937_64 &rng) {
    shape.validate();
    if (noise < 0.0) throw ArgumentError("noise must be >= 0");
    std::normal_distribution<double> gauss(0.0, 1.0);
    OrientedPointCloud cloud;
    cloud.points.reserve(n);
    cloud.normals.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 p = sample_point(shape, rng);
        cloud.normals.push_back(analytic_normal(shape, p));
        if (noise > 0.0) p += noise * Vec3(gauss(rng), gauss(rng), gauss(rng));
        cloud.points.push_back(p);
    }
    return cloud;
}

}  // namespace gpgmm
