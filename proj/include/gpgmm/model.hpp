#pragma once

#include "gpgmm/baselines.hpp"
#include "gpgmm/gp_field.hpp"
#include "gpgmm/surface.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>

namespace gpgmm {

enum class Method { Gmm, Gpgmm, Gpis, LogGpis };

std::string method_name(Method m);
Method parse_method(const std::string &name);

/// A fitted map of any kind behind one query interface.
struct FieldModel {
    Method method = Method::Gmm;
    std::shared_ptr<const HgmmModel> hgmm;  // gmm and gpgmm
    std::size_t active = 8;                 // J for gmm queries
    GpFieldModel field;                     // gpgmm
    BaselineModel baseline;                 // gpis and loggpis

    /// False for Log-GPIS, whose estimate is unsigned.
    [[nodiscard]] bool signed_field() const { return method != Method::LogGpis; }
    [[nodiscard]] FieldPrediction predict(const Vec3 &x) const;
    void predict_batch(std::span<const Vec3> xs, std::span<FieldPrediction> out) const;
    [[nodiscard]] BatchField batch() const;
};

/// Versioned text container. Numbers use 17 significant digits; GP systems
/// are refactorized on load with the stored jitter and checked against the
/// stored weights.
void write_model(std::ostream &out, const FieldModel &model);
FieldModel read_model(std::istream &in);
void save_model(const std::filesystem::path &path, const FieldModel &model);
FieldModel load_model(const std::filesystem::path &path);

}  // namespace gpgmm
