#include "gpgmm/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gpgmm {

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string &key, const std::string &v) {
    char *end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) throw ArgumentError("key '" + key + "': bad number '" + v + "'");
    return x;
}

std::uint64_t to_count(const std::string &key, const std::string &v) {
    char *end = nullptr;
    const auto x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || v[0] == '-' || end != v.c_str() + v.size()) {
        throw ArgumentError("key '" + key + "': bad non-negative integer '" + v + "'");
    }
    return x;
}

bool to_bool(const std::string &key, const std::string &v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ArgumentError("key '" + key + "': bad boolean '" + v + "'");
}

std::vector<std::string> split(const std::string &v, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

std::vector<double> to_list(const std::string &key, const std::string &v) {
    std::vector<double> out;
    for (const auto &s : split(v, ',')) out.push_back(to_double(key, s));
    return out;
}

using Setter = std::function<void(PipelineConfig &, const std::string &, const std::string &)>;
using Getter = std::function<std::string(const PipelineConfig &)>;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

struct Field {
    Setter set;
    Getter get;
};

#define GPGMM_REAL(name, member)                                                                      \
    {name,                                                                                            \
     {[](PipelineConfig &c, const std::string &k, const std::string &v) { c.member = to_double(k, v); }, \
      [](const PipelineConfig &c) { return fmt(c.member); }}}
#define GPGMM_COUNT(name, member, type)                                                                         \
    {name,                                                                                                      \
     {[](PipelineConfig &c, const std::string &k, const std::string &v) { c.member = static_cast<type>(to_count(k, v)); }, \
      [](const PipelineConfig &c) { return std::to_string(c.member); }}}
#define GPGMM_BOOL(name, member)                                                                    \
    {name,                                                                                          \
     {[](PipelineConfig &c, const std::string &k, const std::string &v) { c.member = to_bool(k, v); }, \
      [](const PipelineConfig &c) { return std::string(c.member ? "true" : "false"); }}}

const std::map<std::string, Field> &fields() {
    static const std::map<std::string, Field> f = {
        GPGMM_REAL("virtual_spacing", virtual_spacing),
        GPGMM_REAL("subsample_rate", subsample_rate),
        GPGMM_COUNT("subsample_seed", subsample_seed, std::uint64_t),
        GPGMM_COUNT("pca_k", pca_k, std::size_t),
        GPGMM_BOOL("estimate_normals", estimate_normals),
        GPGMM_COUNT("hgmm.root_k", hgmm.root_k, std::size_t),
        GPGMM_COUNT("hgmm.fanout", hgmm.fanout, std::size_t),
        GPGMM_REAL("hgmm.curvature_threshold", hgmm.curvature_threshold),
        GPGMM_COUNT("hgmm.max_depth", hgmm.max_depth, int),
        GPGMM_COUNT("hgmm.min_points", hgmm.min_points, std::size_t),
        GPGMM_BOOL("hgmm.spatial_curvature", hgmm.spatial_curvature),
        GPGMM_COUNT("hgmm.seed", hgmm.seed, std::uint64_t),
        GPGMM_COUNT("em.max_iter", hgmm.em.max_iter, int),
        GPGMM_REAL("em.tol", hgmm.em.tol),
        GPGMM_REAL("em.reg_eps", hgmm.em.reg_eps),
        GPGMM_COUNT("gmr.active", gp.active, std::size_t),
        GPGMM_REAL("gmr.gradient_step", gp.gradient_step),
        GPGMM_REAL("gp.discrepancy", gp.discrepancy),
        GPGMM_REAL("gp.length_scale", gp.kernel.length_scale),
        GPGMM_REAL("gp.value_noise", gp.kernel.value_noise),
        GPGMM_REAL("gp.gradient_noise", gp.kernel.gradient_noise),
        GPGMM_COUNT("gp.block_capacity", gp.block_capacity, std::size_t),
        GPGMM_REAL("gp.halo", gp.halo),
        GPGMM_REAL("gp.sigma_floor", gp.sigma_floor),
        GPGMM_COUNT("gp.max_octree_depth", gp.max_octree_depth, int),
        GPGMM_REAL("gpis.length_scale", gpis_kernel.length_scale),
        GPGMM_REAL("gpis.value_noise", gpis_kernel.value_noise),
        GPGMM_REAL("gpis.gradient_noise", gpis_kernel.gradient_noise),
        GPGMM_REAL("gpis.prior_mean", gpis_prior_mean),
        GPGMM_REAL("loggpis.length_scale", loggpis_kernel.length_scale),
        GPGMM_REAL("loggpis.value_noise", loggpis_kernel.value_noise),
        GPGMM_REAL("loggpis.d_max", d_max),
        GPGMM_REAL("grid.spacing", grid_spacing),
        {"grid.bounds",
         {[](PipelineConfig &c, const std::string &k, const std::string &v) {
              if (v.empty() || v == "auto") {
                  c.grid_bounds.reset();
                  return;
              }
              const auto b = to_list(k, v);
              if (b.size() != 6) throw ArgumentError("key '" + k + "': expected 6 numbers");
              c.grid_bounds = Box{Vec3(b[0], b[1], b[2]), Vec3(b[3], b[4], b[5])};
          },
          [](const PipelineConfig &c) {
              if (!c.grid_bounds) return std::string("auto");
              const auto &b = *c.grid_bounds;
              return fmt_list({b.min.x(), b.min.y(), b.min.z(), b.max.x(), b.max.y(), b.max.z()});
          }}},
        {"eval.bin_edges",
         {[](PipelineConfig &c, const std::string &k, const std::string &v) { c.bin_edges = to_list(k, v); },
          [](const PipelineConfig &c) { return fmt_list(c.bin_edges); }}},
        {"bench.scene",
         {[](PipelineConfig &c, const std::string &, const std::string &v) { c.bench_scene = v; },
          [](const PipelineConfig &c) { return c.bench_scene; }}},
        GPGMM_COUNT("bench.n_train", bench_n_train, std::size_t),
        GPGMM_COUNT("bench.n_test", bench_n_test, std::size_t),
        GPGMM_REAL("bench.noise", bench_noise),
        GPGMM_COUNT("bench.seed", bench_seed, std::uint64_t),
        GPGMM_BOOL("bench.pca_normals", bench_pca_normals),
        {"bench.methods",
         {[](PipelineConfig &c, const std::string &, const std::string &v) { c.bench_methods = split(v, ','); },
          [](const PipelineConfig &c) {
              std::string s;
              for (std::size_t i = 0; i < c.bench_methods.size(); ++i) s += (i ? "," : "") + c.bench_methods[i];
              return s;
          }}},
    };
    return f;
}

#undef GPGMM_REAL
#undef GPGMM_COUNT
#undef GPGMM_BOOL

}  // namespace

const std::vector<std::string> &config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto &[name, f] : fields()) k.push_back(name);
        return k;
    }();
    return keys;
}

void PipelineConfig::set(const std::string &key, const std::string &value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw UnknownKeyError(key);
    it->second.set(*this, key, value);
}

void PipelineConfig::validate() const {
    if (!(virtual_spacing > 0.0)) throw ArgumentError("virtual_spacing must be > 0");
    if (!(subsample_rate > 0.0 && subsample_rate <= 1.0)) throw ArgumentError("subsample_rate must be in (0, 1]");
    if (pca_k < 3) throw ArgumentError("pca_k must be >= 3");
    if (hgmm.root_k < 1 || hgmm.fanout < 1) throw ArgumentError("hgmm.root_k and hgmm.fanout must be >= 1");
    if (!(hgmm.curvature_threshold >= 0.0)) throw ArgumentError("hgmm.curvature_threshold must be >= 0");
    if (hgmm.em.max_iter < 1) throw ArgumentError("em.max_iter must be >= 1");
    if (!(hgmm.em.tol > 0.0)) throw ArgumentError("em.tol must be > 0");
    if (!(hgmm.em.reg_eps > 0.0)) throw ArgumentError("em.reg_eps must be > 0");
    gp.validate();
    gpis_kernel.validate();
    loggpis_kernel.validate();
    if (!(d_max > 0.0)) throw ArgumentError("loggpis.d_max must be > 0");
    if (!(grid_spacing > 0.0)) throw ArgumentError("grid.spacing must be > 0");
    if (grid_bounds && !(grid_bounds->min.array() < grid_bounds->max.array()).all()) {
        throw ArgumentError("grid.bounds must have min < max on every axis");
    }
    if (bin_edges.size() < 2) throw ArgumentError("eval.bin_edges needs at least two edges");
    for (std::size_t i = 1; i < bin_edges.size(); ++i) {
        if (!(bin_edges[i] > bin_edges[i - 1])) throw ArgumentError("eval.bin_edges must be strictly increasing");
    }
    if (bin_edges.front() < 0.0) throw ArgumentError("eval.bin_edges must be >= 0");
    ShapeSpec::parse(bench_scene).validate();
    if (bench_n_train < 1 || bench_n_test < 1) throw ArgumentError("bench.n_train and bench.n_test must be >= 1");
    if (!(bench_noise >= 0.0)) throw ArgumentError("bench.noise must be >= 0");
    for (const auto &m : bench_methods) {
        if (m != "gmm" && m != "gpgmm" && m != "gpis" && m != "loggpis") {
            throw ArgumentError("bench.methods: unknown method '" + m + "'");
        }
    }
}

PipelineConfig parse_config(std::istream &in) {
    PipelineConfig c;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", no);
        const auto key = trim(line.substr(0, eq));
        try {
            c.set(key, trim(line.substr(eq + 1)));
        } catch (const UnknownKeyError &) {
            throw;
        } catch (const ArgumentError &e) {
            throw ParseError(e.what(), no);
        }
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    return parse_config(in);
}

void write_config(std::ostream &out, const PipelineConfig &config) {
    for (const auto &[name, f] : fields()) out << name << " = " << f.get(config) << '\n';
}

}  // namespace gpgmm
