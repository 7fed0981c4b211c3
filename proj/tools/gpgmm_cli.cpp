// gpgmm: synth | fit | query | mesh | bench
#include "gpgmm/config.hpp"
#include "gpgmm/evaluation.hpp"
#include "gpgmm/pipeline.hpp"
#include "gpgmm/point_io.hpp"
#include "gpgmm/surface.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace gpgmm;

namespace {

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App *cmd, Common &c, bool needs_out = true) {
    cmd->add_option("--config", c.config, "key = value configuration file");
    cmd->add_option("--set", c.sets, "override one configuration key (key=value), repeatable");
    cmd->add_option("--seed", c.seed, "random seed");
    auto *o = cmd->add_option("--out", c.out, "output path");
    if (needs_out) o->required();
}

/// Config file, then --set overrides, then validation. Nothing is written
/// before this succeeds.
PipelineConfig make_config(const Common &c) {
    PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
    for (const auto &kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

std::ofstream open_out(const std::filesystem::path &p) {
    std::ofstream f(p);
    if (!f) throw Error("cannot open " + p.string() + " for writing");
    return f;
}

Box model_bounds(const FieldModel &m) {
    std::vector<Vec3> pts;
    if (m.method == Method::Gpis || m.method == Method::LogGpis) {
        pts = m.baseline.gp().data().points;
    } else {
        for (const auto &g : m.hgmm->leaves()) pts.push_back(g.mean.head<3>());
    }
    return Box::bounding(pts).inflated(0.25);
}

int cmd_synth(const Common &c, const std::string &shape_text, std::size_t n, double noise) {
    const auto shape = ShapeSpec::parse(shape_text);
    shape.validate();
    if (!(noise >= 0.0)) throw ArgumentError("--noise must be >= 0");
    const std::uint64_t seed = c.seed.value_or(1);
    std::mt19937_64 rng(seed);
    const auto cloud = sample_surface(shape, n, noise, rng);
    save_xyz(c.out, cloud);
    auto f = open_out(c.out + ".truth");
    f << "shape " << shape.to_string() << "\nn " << n << "\nnoise " << noise << "\nseed " << seed << '\n';
    return 0;
}

int cmd_fit(const Common &c, const std::string &input, const std::string &method_name_) {
    PipelineConfig cfg = make_config(c);
    if (c.seed) {
        cfg.hgmm.seed = *c.seed;
        cfg.subsample_seed = *c.seed;
    }
    const Method method = parse_method(method_name_);
    const auto cloud = load_point_cloud(input, format_from_path(input));
    FitReport report;
    const auto model = fit_model(method, cloud, cfg, &report);
    save_model(c.out, model);
    auto f = open_out(c.out + ".log");
    f << report.to_text(method);
    std::cerr << report.to_text(method);
    return 0;
}

int cmd_query(const Common &c, const std::string &model_path, const std::string &points) {
    const auto model = load_model(model_path);
    const auto cloud = load_point_cloud(points, format_from_path(points));
    std::vector<FieldPrediction> pred(cloud.size());
    model.predict_batch(cloud.points, pred);
    auto f = open_out(c.out);
    f << "x,y,z,mean,variance\n";
    char buf[160];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto &p = cloud.points[i];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.x(), p.y(), p.z(), pred[i].mean,
                      pred[i].variance);
        f << buf;
    }
    return 0;
}

int cmd_mesh(const Common &c, const std::string &model_path, const std::vector<double> &bounds,
             std::optional<double> spacing, const std::string &grid_out) {
    const PipelineConfig cfg = make_config(c);
    if (!bounds.empty() && bounds.size() != 6) throw ArgumentError("--bounds expects 6 numbers");
    const auto model = load_model(model_path);
    Box box = bounds.size() == 6 ? Box{Vec3(bounds[0], bounds[1], bounds[2]), Vec3(bounds[3], bounds[4], bounds[5])}
                                 : cfg.grid_bounds.value_or(model_bounds(model));
    const auto grid = sample_grid(model.batch(), box, spacing.value_or(cfg.grid_spacing));
    const auto mesh = marching_cubes(grid);
    write_mesh_ply(c.out, mesh);
    if (!grid_out.empty()) {
        std::ofstream g(grid_out, std::ios::binary);
        if (!g) throw Error("cannot open " + grid_out + " for writing");
        write_grid(g, grid);
    }
    std::cerr << "vertices: " << mesh.vertices.size() << "\ntriangles: " << mesh.triangles.size()
              << "\nwatertight: " << (mesh.watertight() ? "yes" : "no") << '\n';
    return 0;
}

int cmd_bench(const Common &c, const std::string &scene, const std::string &methods) {
    PipelineConfig cfg = make_config(c);
    if (!scene.empty()) cfg.set("bench.scene", scene);
    if (!methods.empty()) cfg.set("bench.methods", methods);
    if (c.seed) cfg.bench_seed = *c.seed;
    cfg.validate();
    const auto report = run_benchmark(benchmark_from_config(cfg), cfg);
    write_report(c.out, report);
    for (const auto &f : report.failures) std::cerr << "failed: " << f << '\n';
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Signed distance field mapping with a hierarchical Gaussian mixture prior and a GP refinement"};
    app.require_subcommand(1);

    Common synth_c, fit_c, query_c, mesh_c, bench_c;
    std::string shape = "sphere:0,0,0,1";
    std::size_t n = 1000;
    double noise = 0.0;
    auto *synth = app.add_subcommand("synth", "sample points on an analytic shape");
    add_common(synth, synth_c);
    synth->add_option("--shape", shape, "shape spec, e.g. sphere:0,0,0,1 or box:-1,-1,-1,1,1,1");
    synth->add_option("--n", n, "number of points");
    synth->add_option("--noise", noise, "Gaussian position noise (m)");

    std::string input, method = "gpgmm";
    auto *fit = app.add_subcommand("fit", "fit a distance field model to a point cloud");
    add_common(fit, fit_c);
    fit->add_option("--input", input, "point cloud (.xyz or .ply)")->required();
    fit->add_option("--method", method, "gmm | gpgmm | gpis | loggpis");

    std::string model_path, points;
    auto *query = app.add_subcommand("query", "predict distance mean and variance at points");
    add_common(query, query_c);
    query->add_option("--model", model_path, "model file")->required();
    query->add_option("--points", points, "query points (.xyz or .ply)")->required();

    std::vector<double> bounds;
    std::optional<double> spacing;
    std::string grid_out;
    auto *mesh = app.add_subcommand("mesh", "extract the zero level set as a PLY mesh");
    add_common(mesh, mesh_c);
    mesh->add_option("--model", model_path, "model file")->required();
    mesh->add_option("--bounds", bounds, "xmin ymin zmin xmax ymax zmax")->expected(6);
    mesh->add_option("--spacing", spacing, "grid spacing (m)");
    mesh->add_option("--grid", grid_out, "also write the sampled grid (binary)");

    std::string scene, methods;
    auto *bench = app.add_subcommand("bench", "benchmark methods on an analytic scene");
    add_common(bench, bench_c);
    bench->add_option("--scene", scene, "shape spec of the scene");
    bench->add_option("--methods", methods, "comma-separated subset of gmm,gpgmm,gpis,loggpis");
    bench->add_option("--method", methods, "alias of --methods");

    CLI11_PARSE(app, argc, argv);
    try {
        if (synth->parsed()) return cmd_synth(synth_c, shape, n, noise);
        if (fit->parsed()) return cmd_fit(fit_c, input, method);
        if (query->parsed()) return cmd_query(query_c, model_path, points);
        if (mesh->parsed()) return cmd_mesh(mesh_c, model_path, bounds, spacing, grid_out);
        if (bench->parsed()) return cmd_bench(bench_c, scene, methods);
    } catch (const UnknownKeyError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ArgumentError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
