#include "gpgmm/model.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace gpgmm {

std::string method_name(Method m) {
    switch (m) {
        case Method::Gmm: return "gmm";
        case Method::Gpgmm: return "gpgmm";
        case Method::Gpis: return "gpis";
        case Method::LogGpis: return "loggpis";
    }
    return "?";
}

Method parse_method(const std::string &name) {
    if (name == "gmm") return Method::Gmm;
    if (name == "gpgmm") return Method::Gpgmm;
    if (name == "gpis") return Method::Gpis;
    if (name == "loggpis") return Method::LogGpis;
    throw ArgumentError("unknown method '" + name + "' (expected gmm, gpgmm, gpis or loggpis)");
}

FieldPrediction FieldModel::predict(const Vec3 &x) const {
    switch (method) {
        case Method::Gmm: {
            if (!hgmm) throw StateError("GMM model is not fitted");
            const auto g = regress(*hgmm, x, active);
            return {g.mean, g.variance};
        }
        case Method::Gpgmm: return field.predict(x);
        case Method::Gpis:
        case Method::LogGpis: return baseline.predict(x);
    }
    throw StateError("unknown model kind");
}

void FieldModel::predict_batch(std::span<const Vec3> xs, std::span<FieldPrediction> out) const {
    if (xs.size() != out.size()) throw ArgumentError("batch size mismatch");
    switch (method) {
        case Method::Gmm:
            for (std::size_t i = 0; i < xs.size(); ++i) out[i] = predict(xs[i]);
            return;
        case Method::Gpgmm: field.predict_batch(xs, out); return;
        case Method::Gpis:
        case Method::LogGpis: baseline.predict_batch(xs, out); return;
    }
}

BatchField FieldModel::batch() const {
    return [this](std::span<const Vec3> xs, std::span<FieldPrediction> out) { predict_batch(xs, out); };
}

namespace {

struct Writer {
    std::ostream &out;
    char buf[64];

    Writer &num(double v) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        out << buf;
        return *this;
    }
    Writer &vec(const Vec3 &v) { return num(v.x()).num(v.y()).num(v.z()); }
    Writer &word(const std::string &w) {
        out << w;
        return *this;
    }
    Writer &cnt(std::size_t n) {
        out << ' ' << n;
        return *this;
    }
    void end() { out << '\n'; }
};

struct Reader {
    std::istream &in;

    std::string token() {
        std::string t;
        if (!(in >> t)) throw ParseError("unexpected end of model file", 0);
        return t;
    }
    void expect(const std::string &w) {
        const auto t = token();
        if (t != w) throw ParseError("expected '" + w + "' in model file, found '" + t + "'", 0);
    }
    double num() {
        const auto t = token();
        char *end = nullptr;
        errno = 0;
        const double v = std::strtod(t.c_str(), &end);
        if (end != t.c_str() + t.size() || t.empty()) throw ParseError("bad number '" + t + "' in model file", 0);
        return v;
    }
    Vec3 vec() {
        const double x = num(), y = num(), z = num();
        return {x, y, z};
    }
    std::size_t cnt() {
        const auto t = token();
        char *end = nullptr;
        const auto v = std::strtoull(t.c_str(), &end, 10);
        if (end != t.c_str() + t.size() || t.empty() || t[0] == '-') {
            throw ParseError("bad count '" + t + "' in model file", 0);
        }
        return static_cast<std::size_t>(v);
    }
    long integer() {
        const auto t = token();
        char *end = nullptr;
        const long v = std::strtol(t.c_str(), &end, 10);
        if (end != t.c_str() + t.size() || t.empty()) throw ParseError("bad integer '" + t + "' in model file", 0);
        return v;
    }
};

void write_kernel(Writer &w, const KernelParams &k) {
    w.word("kernel").num(k.length_scale).num(k.value_noise).num(k.gradient_noise).end();
}

KernelParams read_kernel(Reader &r) {
    r.expect("kernel");
    KernelParams k;
    k.length_scale = r.num();
    k.value_noise = r.num();
    k.gradient_noise = r.num();
    k.validate();
    return k;
}

void write_alpha(Writer &w, const JointGp &gp) {
    w.word("system").num(gp.jitter()).cnt(static_cast<std::size_t>(gp.alpha().size()));
    for (Eigen::Index i = 0; i < gp.alpha().size(); ++i) w.num(gp.alpha()[i]);
    w.end();
}

std::pair<double, Eigen::VectorXd> read_alpha(Reader &r) {
    r.expect("system");
    const double jitter = r.num();
    const auto n = r.cnt();
    Eigen::VectorXd a(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) a[static_cast<Eigen::Index>(i)] = r.num();
    return {jitter, a};
}

void write_field(Writer &w, const GpFieldModel &f) {
    const auto &c = f.config();
    write_kernel(w, c.kernel);
    w.word("field").cnt(c.active).num(c.gradient_step).num(c.discrepancy).cnt(c.block_capacity).num(c.halo)
        .num(c.sigma_floor).cnt(static_cast<std::size_t>(c.max_octree_depth)).end();
    w.word("octree").cnt(f.octree().size()).end();
    for (const auto &n : f.octree()) {
        w.word("node").vec(n.box.min).vec(n.box.max);
        w.out << ' ' << n.depth;
        for (int ch : n.children) w.out << ' ' << ch;
        w.out << ' ' << n.block;
        w.end();
    }
    w.word("blocks").cnt(f.blocks().size()).end();
    for (const auto &b : f.blocks()) {
        w.word("block").vec(b.region.min).vec(b.region.max).cnt(b.points.size()).cnt(b.prior_only ? 1 : 0).end();
        for (std::size_t i = 0; i < b.points.size(); ++i) {
            w.word("p").vec(b.points[i]).vec(b.normals[i]).num(b.prior_means[i]).vec(b.prior_grad_means[i])
                .num(b.prior_scales[i]).cnt(b.owned[i]).end();
        }
        if (!b.prior_only) write_alpha(w, b.gp);
    }
}

GpFieldModel read_field(Reader &r, std::shared_ptr<const HgmmModel> hgmm) {
    GpFieldConfig c;
    c.kernel = read_kernel(r);
    r.expect("field");
    c.active = r.cnt();
    c.gradient_step = r.num();
    c.discrepancy = r.num();
    c.block_capacity = r.cnt();
    c.halo = r.num();
    c.sigma_floor = r.num();
    c.max_octree_depth = static_cast<int>(r.cnt());
    c.validate();
    r.expect("octree");
    std::vector<OctreeNode> nodes(r.cnt());
    for (auto &n : nodes) {
        r.expect("node");
        n.box.min = r.vec();
        n.box.max = r.vec();
        n.depth = static_cast<int>(r.integer());
        for (auto &ch : n.children) {
            ch = static_cast<int>(r.integer());
            if (ch >= static_cast<long>(nodes.size())) throw ParseError("octree child index out of range", 0);
        }
        n.block = static_cast<int>(r.integer());
    }
    r.expect("blocks");
    std::vector<GpBlock> blocks(r.cnt());
    for (auto &b : blocks) {
        r.expect("block");
        Box region;
        region.min = r.vec();
        region.max = r.vec();
        const auto n = r.cnt();
        const bool prior_only = r.cnt() != 0;
        std::vector<Vec3> pts(n), nrm(n), grad(n);
        std::vector<double> means(n), scales(n);
        std::vector<std::uint8_t> owned(n);
        for (std::size_t i = 0; i < n; ++i) {
            r.expect("p");
            pts[i] = r.vec();
            nrm[i] = r.vec();
            means[i] = r.num();
            grad[i] = r.vec();
            scales[i] = r.num();
            owned[i] = static_cast<std::uint8_t>(r.cnt() != 0);
        }
        double jitter = 0.0;
        Eigen::VectorXd alpha;
        if (!prior_only) std::tie(jitter, alpha) = read_alpha(r);
        b = restore_block(region, std::move(pts), std::move(nrm), std::move(owned), std::move(means), std::move(grad),
                          std::move(scales), prior_only, jitter, alpha, c.kernel);
    }
    return GpFieldModel(std::move(hgmm), c, std::move(nodes), std::move(blocks));
}

void write_baseline(Writer &w, const BaselineModel &b) {
    write_kernel(w, b.gp().params());
    const auto &d = b.gp().data();
    w.word("baseline").num(b.prior_mean()).num(b.prior_scale()).num(b.d_max()).cnt(d.points.size()).end();
    for (std::size_t i = 0; i < d.points.size(); ++i) {
        w.word("p").vec(d.points[i]);
        if (d.with_gradients()) w.vec(d.gradient_residuals[i]);
        w.end();
    }
    write_alpha(w, b.gp());
}

BaselineModel read_baseline(Reader &r, Method m) {
    const auto kernel = read_kernel(r);
    r.expect("baseline");
    const double prior_mean = r.num(), prior_scale = r.num(), d_max = r.num();
    const auto n = r.cnt();
    GpTrainingData d;
    for (std::size_t i = 0; i < n; ++i) {
        r.expect("p");
        d.points.push_back(r.vec());
        if (m == Method::Gpis) d.gradient_residuals.push_back(r.vec());
    }
    d.scales.assign(n, prior_scale);
    d.value_residuals.assign(n, m == Method::Gpis ? 0.0 - prior_mean : 1.0);
    const auto [jitter, alpha] = read_alpha(r);
    auto gp = JointGp::fit(std::move(d), kernel, jitter);
    if (!gp.ok()) throw ModelError("stored baseline no longer factorizes");
    if (gp.alpha().size() != alpha.size() ||
        (gp.alpha() - alpha).cwiseAbs().maxCoeff() > 1e-6 * (1.0 + alpha.cwiseAbs().maxCoeff())) {
        throw ModelError("stored baseline weights disagree with the refitted system");
    }
    return {m == Method::Gpis ? BaselineKind::Gpis : BaselineKind::LogGpis, std::move(gp), prior_mean, prior_scale,
            d_max};
}

}  // namespace

void write_model(std::ostream &out, const FieldModel &model) {
    Writer w{out, {}};
    w.word("gpgmm-model 1").end();
    w.word("method " + method_name(model.method)).end();
    switch (model.method) {
        case Method::Gmm:
            if (!model.hgmm) throw StateError("GMM model is not fitted");
            w.word("active").cnt(model.active).end();
            write_hgmm(out, *model.hgmm);
            break;
        case Method::Gpgmm:
            write_hgmm(out, model.field.hgmm());
            write_field(w, model.field);
            break;
        case Method::Gpis:
        case Method::LogGpis:
            if (!model.baseline.fitted()) throw StateError("baseline model is not fitted");
            write_baseline(w, model.baseline);
            break;
    }
    w.word("end").end();
}

FieldModel read_model(std::istream &in) {
    Reader r{in};
    r.expect("gpgmm-model");
    if (r.integer() != 1) throw ParseError("unsupported model version", 0);
    r.expect("method");
    FieldModel m;
    m.method = parse_method(r.token());
    switch (m.method) {
        case Method::Gmm:
            r.expect("active");
            m.active = r.cnt();
            m.hgmm = std::make_shared<const HgmmModel>(read_hgmm(in));
            break;
        case Method::Gpgmm:
            m.hgmm = std::make_shared<const HgmmModel>(read_hgmm(in));
            m.field = read_field(r, m.hgmm);
            m.active = m.field.config().active;
            break;
        case Method::Gpis:
        case Method::LogGpis: m.baseline = read_baseline(r, m.method); break;
    }
    r.expect("end");
    return m;
}

void save_model(const std::filesystem::path &path, const FieldModel &model) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_model(out, model);
    if (!out) throw Error("failed writing " + path.string());
}

FieldModel load_model(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model " + path.string());
    return read_model(in);
}

}  // namespace gpgmm
