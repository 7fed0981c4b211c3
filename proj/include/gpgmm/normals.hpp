#pragma once

#include "gpgmm/geometry.hpp"

#include <cstdint>
#include <optional>

namespace gpgmm {

/// ceil(rate * N) points drawn uniformly without replacement, kept in their
/// original order. Deterministic for a fixed seed.
OrientedPointCloud subsample(const OrientedPointCloud &cloud, double rate, std::uint64_t seed);

/// Per-point PCA normals from the k-nearest-neighbour scatter matrix (the
/// point itself included). Normals point toward `viewpoint` when given, else
/// away from the neighbourhood centroid; if that is ambiguous (flat
/// neighbourhood) the largest-magnitude component is made positive.
/// Coincident neighbourhoods yield a null (zero) normal.
OrientedPointCloud estimate_normals_pca(const OrientedPointCloud &cloud, std::size_t k,
                                        const std::optional<Vec3> &viewpoint = std::nullopt);

}  // namespace gpgmm
