#pragma once

#include "gpgmm/config.hpp"
#include "gpgmm/model.hpp"

#include <string>
#include <vector>

namespace gpgmm {

struct FitReport {
    std::size_t input_points = 0;
    std::size_t hgmm_points = 0;  // hits after subsampling
    std::size_t leaves = 0;
    int max_depth = 0;
    std::size_t gp_input_points = 0;
    std::size_t selected_points = 0;
    std::size_t blocks = 0;
    std::size_t prior_only_blocks = 0;
    double seconds_normals = 0.0;
    double seconds_hgmm = 0.0;
    double seconds_gp = 0.0;
    double seconds_total = 0.0;
    std::vector<std::string> log;

    /// Human-readable key: value lines; timing lines start with "time_".
    [[nodiscard]] std::string to_text(Method method) const;
};

/// Normals are estimated by PCA when the cloud has none or when the config
/// asks for it; points whose normal cannot be estimated are dropped.
OrientedPointCloud prepare_normals(const OrientedPointCloud &cloud, const PipelineConfig &config);

/// Mixture prior: subsample hits, add virtual points, fit the hierarchy.
std::shared_ptr<const HgmmModel> fit_prior(const OrientedPointCloud &cloud, const PipelineConfig &config,
                                           FitReport *report = nullptr);

/// Fits one method end to end on a cloud with or without normals.
FieldModel fit_model(Method method, const OrientedPointCloud &cloud, const PipelineConfig &config,
                     FitReport *report = nullptr);

}  // namespace gpgmm
