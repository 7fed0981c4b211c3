#include "gpgmm/pipeline.hpp"

#include "gpgmm/normals.hpp"

#include <chrono>
#include <sstream>

namespace gpgmm {

namespace {

double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string FitReport::to_text(Method method) const {
    std::ostringstream o;
    o << "method: " << method_name(method) << '\n' << "input_points: " << input_points << '\n';
    if (method == Method::Gmm || method == Method::Gpgmm) {
        o << "hgmm_points: " << hgmm_points << '\n' << "leaves: " << leaves << '\n' << "max_depth: " << max_depth << '\n';
    }
    if (method == Method::Gpgmm) {
        o << "gp_input_points: " << gp_input_points << '\n' << "selected_points: " << selected_points << '\n';
        o << "selected_fraction: " << (gp_input_points ? double(selected_points) / double(gp_input_points) : 0.0)
          << '\n';
        o << "blocks: " << blocks << '\n' << "prior_only_blocks: " << prior_only_blocks << '\n';
    }
    o << "time_normals_s: " << seconds_normals << '\n' << "time_hgmm_s: " << seconds_hgmm << '\n'
      << "time_gp_s: " << seconds_gp << '\n' << "time_total_s: " << seconds_total << '\n';
    for (const auto &l : log) o << "log: " << l << '\n';
    return o.str();
}

OrientedPointCloud prepare_normals(const OrientedPointCloud &cloud, const PipelineConfig &config) {
    cloud.validate();
    if (cloud.has_normals() && !config.estimate_normals) return cloud.with_valid_normals();
    return estimate_normals_pca(cloud, config.pca_k, cloud.viewpoint).with_valid_normals();
}

std::shared_ptr<const HgmmModel> fit_prior(const OrientedPointCloud &cloud, const PipelineConfig &config,
                                           FitReport *report) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sub = subsample(cloud, config.subsample_rate, config.subsample_seed);
    const auto samples = augment_virtual_points(sub, config.virtual_spacing);
    auto model = std::make_shared<const HgmmModel>(fit_hgmm(samples, config.hgmm));
    if (report) {
        report->hgmm_points = sub.size();
        report->leaves = model->size();
        report->max_depth = model->max_leaf_depth();
        report->seconds_hgmm = since(t0);
        for (const auto &l : model->log()) report->log.push_back("hgmm: " + l);
    }
    return model;
}

FieldModel fit_model(Method method, const OrientedPointCloud &cloud, const PipelineConfig &config,
                     FitReport *report) {
    config.validate();
    if (cloud.empty()) throw ArgumentError("cannot fit an empty point cloud");
    FitReport local;
    FitReport &r = report ? *report : local;
    r = FitReport{};
    r.input_points = cloud.size();
    const auto t0 = std::chrono::steady_clock::now();

    FieldModel m;
    m.method = method;
    m.active = config.gp.active;
    if (method == Method::LogGpis) {
        m.baseline = loggpis_fit(cloud, config.loggpis_kernel, config.d_max);
        r.seconds_total = since(t0);
        return m;
    }
    const auto tn = std::chrono::steady_clock::now();
    const auto oriented = prepare_normals(cloud, config);
    r.seconds_normals = since(tn);
    if (oriented.size() < cloud.size()) {
        r.log.push_back(std::to_string(cloud.size() - oriented.size()) + " points without a usable normal dropped");
    }
    if (oriented.empty()) throw ArgumentError("no point has a usable normal");

    if (method == Method::Gpis) {
        m.baseline = gpis_fit(oriented, config.gpis_kernel, config.gpis_prior_mean);
    } else {
        m.hgmm = fit_prior(oriented, config, &r);
        if (method == Method::Gpgmm) {
            const auto tg = std::chrono::steady_clock::now();
            GpFieldFitStats stats;
            m.field = fit_gp_field(m.hgmm, oriented, config.gp, &stats);
            r.seconds_gp = since(tg);
            r.gp_input_points = stats.input_points;
            r.selected_points = stats.selected_points;
            r.blocks = stats.blocks;
            r.prior_only_blocks = stats.prior_only_blocks;
            for (const auto &l : stats.log) r.log.push_back("gp: " + l);
        }
    }
    r.seconds_total = since(t0);
    return m;
}

}  // namespace gpgmm
