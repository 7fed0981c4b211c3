#include "gpgmm/point_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gpgmm {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

bool to_double(std::string_view tok, double &v) {
    const char *first = tok.data();
    const char *last = tok.data() + tok.size();
    if (first < last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    return ec == std::errc() && ptr == last;
}

Vec3 unit_or_null(const Vec3 &n) {
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3(Vec3::Zero());
}

}  // namespace

CloudFormat format_from_path(const std::filesystem::path &path) {
    auto ext = path.extension().string();
    for (auto &c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".ply" ? CloudFormat::PlyAscii : CloudFormat::XyzAscii;
}

OrientedPointCloud parse_xyz(std::istream &in) {
    OrientedPointCloud cloud;
    std::string line;
    std::size_t lineno = 0;
    int columns = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto toks = split_ws(line);
        if (toks.empty() || toks.front().front() == '#') continue;
        const int n = static_cast<int>(toks.size());
        if (n != 3 && n != 6) throw ParseError("expected 3 or 6 columns, got " + std::to_string(n), lineno);
        if (columns == 0) columns = n;
        if (n != columns) throw ParseError("column count changed from " + std::to_string(columns), lineno);
        double v[6];
        for (int i = 0; i < n; ++i) {
            if (!to_double(toks[i], v[i])) {
                throw ParseError("not a number: '" + std::string(toks[i]) + "'", lineno);
            }
        }
        cloud.points.emplace_back(v[0], v[1], v[2]);
        if (n == 6) cloud.normals.push_back(unit_or_null(Vec3(v[3], v[4], v[5])));
    }
    if (cloud.points.empty()) throw ParseError("empty input: no points", 0);
    return cloud;
}

OrientedPointCloud parse_ply(std::istream &in) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next() || line != "ply") throw ParseError("missing 'ply' magic", lineno);

    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> properties;
        bool has_list = false;
    };
    std::vector<Element> elements;
    bool ascii = false;
    for (;;) {
        if (!next()) throw ParseError("unterminated PLY header", lineno);
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks[0] == "end_header") break;
        if (toks[0] == "comment" || toks[0] == "obj_info") continue;
        if (toks[0] == "format") {
            if (toks.size() < 2 || toks[1] != "ascii") throw ParseError("only ASCII PLY is supported", lineno);
            ascii = true;
        } else if (toks[0] == "element") {
            if (toks.size() != 3) throw ParseError("malformed element line", lineno);
            Element e;
            e.name = std::string(toks[1]);
            double c = 0;
            if (!to_double(toks[2], c) || c < 0) throw ParseError("bad element count", lineno);
            e.count = static_cast<std::size_t>(c);
            elements.push_back(std::move(e));
        } else if (toks[0] == "property") {
            if (elements.empty()) throw ParseError("property before element", lineno);
            if (toks.size() >= 2 && toks[1] == "list") {
                elements.back().has_list = true;
                elements.back().properties.emplace_back(toks.back());
            } else if (toks.size() == 3) {
                elements.back().properties.emplace_back(toks[2]);
            } else {
                throw ParseError("malformed property line", lineno);
            }
        } else {
            throw ParseError("unknown header keyword '" + std::string(toks[0]) + "'", lineno);
        }
    }
    if (!ascii) throw ParseError("PLY format line missing", lineno);

    OrientedPointCloud cloud;
    for (const auto &e : elements) {
        if (e.name != "vertex") {
            // Skip non-vertex elements; their rows are opaque here.
            for (std::size_t i = 0; i < e.count; ++i) {
                if (!next()) throw ParseError("truncated element '" + e.name + "'", lineno);
            }
            continue;
        }
        if (e.has_list) throw ParseError("list properties on vertices are not supported", 0);
        auto find = [&](const char *name) -> int {
            for (std::size_t i = 0; i < e.properties.size(); ++i) {
                if (e.properties[i] == name) return static_cast<int>(i);
            }
            return -1;
        };
        const int ix = find("x"), iy = find("y"), iz = find("z");
        const int inx = find("nx"), iny = find("ny"), inz = find("nz");
        if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z", 0);
        const bool normals = inx >= 0 && iny >= 0 && inz >= 0;
        for (std::size_t i = 0; i < e.count; ++i) {
            if (!next()) throw ParseError("truncated vertex list", lineno);
            const auto toks = split_ws(line);
            if (toks.size() != e.properties.size()) {
                throw ParseError("expected " + std::to_string(e.properties.size()) + " values", lineno);
            }
            std::vector<double> v(toks.size());
            for (std::size_t k = 0; k < toks.size(); ++k) {
                if (!to_double(toks[k], v[k])) {
                    throw ParseError("not a number: '" + std::string(toks[k]) + "'", lineno);
                }
            }
            cloud.points.emplace_back(v[ix], v[iy], v[iz]);
            if (normals) cloud.normals.push_back(unit_or_null(Vec3(v[inx], v[iny], v[inz])));
        }
    }
    if (cloud.points.empty()) throw ParseError("empty input: no vertices", 0);
    return cloud;
}

OrientedPointCloud load_point_cloud(const std::filesystem::path &path, CloudFormat format) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return format == CloudFormat::PlyAscii ? parse_ply(in) : parse_xyz(in);
}

void save_xyz(const std::filesystem::path &path, const OrientedPointCloud &cloud) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    char buf[256];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto &p = cloud.points[i];
        int n = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", p.x(), p.y(), p.z());
        out.write(buf, n);
        if (cloud.has_normals()) {
            const auto &q = cloud.normals[i];
            n = std::snprintf(buf, sizeof buf, " %.17g %.17g %.17g", q.x(), q.y(), q.z());
            out.write(buf, n);
        }
        out.put('\n');
    }
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace gpgmm
