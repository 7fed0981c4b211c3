#pragma once

#include "gpgmm/geometry.hpp"

#include <filesystem>
#include <string>

namespace gpgmm {

enum class CloudFormat { XyzAscii, PlyAscii };

/// Picks the format from the file extension (".ply" -> PLY, anything else XYZ).
CloudFormat format_from_path(const std::filesystem::path &path);

/// Reads an ASCII XYZ ("x y z [nx ny nz]", '#' comments) or ASCII PLY cloud.
/// Normals, when present, are renormalized; an all-zero normal is kept as the
/// null (invalid) normal.
OrientedPointCloud load_point_cloud(const std::filesystem::path &path, CloudFormat format);

/// Parses XYZ text already in memory. Used by load_point_cloud.
OrientedPointCloud parse_xyz(std::istream &in);
OrientedPointCloud parse_ply(std::istream &in);

/// Writes "x y z [nx ny nz]" rows with 17 significant digits.
void save_xyz(const std::filesystem::path &path, const OrientedPointCloud &cloud);

}  // namespace gpgmm
