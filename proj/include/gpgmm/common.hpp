#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace gpgmm {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based, 0 when not line-specific.
class ParseError : public Error {
public:
    ParseError(const std::string &what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}

    [[nodiscard]] std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Argument outside an operation's precondition.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Operation called on an object in the wrong state (e.g. unfitted).
class StateError : public Error {
public:
    using Error::Error;
};

/// A model whose parameters violate their invariants.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Axis-aligned box.
struct Box {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    [[nodiscard]] bool contains(const Vec3 &p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    [[nodiscard]] Vec3 center() const { return 0.5 * (min + max); }
    [[nodiscard]] Vec3 extent() const { return max - min; }
    [[nodiscard]] Vec3 clamp(const Vec3 &p) const { return p.cwiseMax(min).cwiseMin(max); }
    /// Euclidean distance from p to the box (0 inside).
    [[nodiscard]] double distance(const Vec3 &p) const { return (p - clamp(p)).norm(); }
    [[nodiscard]] Box inflated(double margin) const {
        return {min.array() - margin, max.array() + margin};
    }

    static Box bounding(const std::vector<Vec3> &points);
};

/// Mean and variance of a field query.
struct FieldPrediction {
    double mean = 0.0;
    double variance = 0.0;
};

}  // namespace gpgmm
