#pragma once

#include "gpgmm/config.hpp"
#include "gpgmm/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gpgmm {

enum class FieldType { Sdf, Edf };

std::string field_type_name(FieldType t);

struct PredictionRecord {
    Vec3 query = Vec3::Zero();
    double truth = 0.0;  // |.| for edf records
    double mean = 0.0;   // |.| for edf records
    double variance = 0.0;
    std::string method;
    FieldType type = FieldType::Sdf;
};

/// Bin index of |truth| for edges e_0 < ... < e_m ([e_i, e_{i+1})), or none.
std::optional<std::size_t> bin_of(double truth, const std::vector<double> &edges);

/// Per-bin RMSE over |truth|; empty bins are nullopt.
std::vector<std::optional<double>> rmse_binned(const std::vector<PredictionRecord> &records,
                                               const std::vector<double> &edges);

/// Mean Gaussian log-density of truth under (mean, variance).
double avg_loglik(const std::vector<PredictionRecord> &records);
std::vector<std::optional<double>> avg_loglik_binned(const std::vector<PredictionRecord> &records,
                                                     const std::vector<double> &edges);

struct Coverage {
    double within1 = 0.0;
    double within2 = 0.0;
    double within3 = 0.0;
};

/// Fraction of standardized errors |z| <= 1, 2, 3.
Coverage calibration(const std::vector<PredictionRecord> &records);

struct BinRow {
    std::string method;
    FieldType type = FieldType::Sdf;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double rmse = 0.0;
    double mean_ll = 0.0;
};

struct TimingRow {
    std::string method;
    std::string phase;  // fit, fit_hgmm, fit_gp, predict
    std::size_t n_points = 0;
    double seconds = 0.0;
};

struct EvalReport {
    std::vector<double> bin_edges;
    std::vector<BinRow> rows;  // non-empty bins only
    std::vector<TimingRow> timings;
    std::vector<PredictionRecord> records;
    std::vector<std::string> failures;  // "method: message"
    std::vector<std::string> notes;     // metadata lines

    /// Records of one method and field type.
    [[nodiscard]] std::vector<PredictionRecord> select(const std::string &method, FieldType type) const;
    [[nodiscard]] const BinRow *row(const std::string &method, FieldType type, std::size_t bin) const;
};

struct BenchmarkSpec {
    ShapeSpec scene;
    std::size_t n_train = 2000;
    std::size_t n_test = 2000;
    double noise = 0.0;
    std::vector<Method> methods;
    std::uint64_t seed = 1;
};

BenchmarkSpec benchmark_from_config(const PipelineConfig &config);

/// Query points with ground truth: about 80% offsets along analytic normals
/// stratified over the bins (both signs), the rest uniform in the volume
/// band |sdf| < last edge.
std::vector<Vec3> benchmark_queries(const ShapeSpec &scene, std::size_t n, const std::vector<double> &edges,
                                    std::mt19937_64 &rng);

/// Fits every method on the same training cloud and scores it against the
/// analytic SDF. A method that throws is reported in `failures`.
EvalReport run_benchmark(const BenchmarkSpec &spec, const PipelineConfig &config);

/// Fills rows from records.
void summarize(EvalReport &report);

inline constexpr const char *kMetricsHeader = "method,field_type,bin_lo,bin_hi,count,rmse,mean_ll";
inline constexpr const char *kTimingHeader = "method,phase,n_points,seconds";

void write_metrics_csv(std::ostream &out, const EvalReport &report);
void write_timing_csv(std::ostream &out, const EvalReport &report);
/// Writes metrics.csv, timings.csv and report_meta.txt into `dir`.
void write_report(const std::filesystem::path &dir, const EvalReport &report);

}  // namespace gpgmm
