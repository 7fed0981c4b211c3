#pragma once

#include "gpgmm/baselines.hpp"
#include "gpgmm/geometry.hpp"
#include "gpgmm/gp_field.hpp"
#include "gpgmm/hgmm.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gpgmm {

/// Every tunable of the pipeline. Keys in the text form are listed by
/// config_keys(); the file format is "key = value" per line with '#' comments.
struct PipelineConfig {
    // Preprocessing
    double virtual_spacing = 0.2;
    double subsample_rate = 0.15;
    std::uint64_t subsample_seed = 7;
    std::size_t pca_k = 20;
    bool estimate_normals = false;  // re-estimate even when the cloud carries normals

    HgmmConfig hgmm;
    GpFieldConfig gp;  // also holds J, h and d_m

    KernelParams gpis_kernel{0.3, 0.01, 0.1};
    double gpis_prior_mean = kGpisPriorMean;
    KernelParams loggpis_kernel{0.1, 0.01, 0.1};
    double d_max = 2.0;

    // Meshing
    double grid_spacing = 0.05;
    std::optional<Box> grid_bounds;  // default: data bounds inflated by 0.25 m

    // Benchmark
    std::vector<double> bin_edges{0.0, 0.025, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5};
    std::string bench_scene = "sphere:0,0,0,1";
    std::size_t bench_n_train = 2000;
    std::size_t bench_n_test = 2000;
    double bench_noise = 0.0;
    std::uint64_t bench_seed = 1;
    std::vector<std::string> bench_methods{"gmm", "gpgmm", "gpis", "loggpis"};
    bool bench_pca_normals = true;

    /// Sets one key; throws ArgumentError naming unknown keys or bad values.
    void set(const std::string &key, const std::string &value);
    void validate() const;
};

/// Unknown key in a configuration file or override.
class UnknownKeyError : public ArgumentError {
public:
    explicit UnknownKeyError(const std::string &key)
        : ArgumentError("unknown configuration key '" + key + "'"), key_(key) {}
    [[nodiscard]] const std::string &key() const { return key_; }

private:
    std::string key_;
};

const std::vector<std::string> &config_keys();

PipelineConfig parse_config(std::istream &in);
PipelineConfig load_config(const std::filesystem::path &path);
/// Key = value dump readable by parse_config.
void write_config(std::ostream &out, const PipelineConfig &config);

}  // namespace gpgmm
