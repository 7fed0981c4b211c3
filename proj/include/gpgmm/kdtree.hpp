#pragma once

#include "gpgmm/common.hpp"

#include <cstddef>
#include <vector>

namespace gpgmm {

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
};

/// Static 3D k-d tree over a point set. Immutable after construction, so
/// concurrent queries are safe. Holds a copy of the points.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points, std::size_t leaf_size = 16);

    /// The k nearest points, ascending by distance, ties broken by lower index.
    [[nodiscard]] std::vector<Neighbor> knn(const Vec3 &query, std::size_t k) const;

    /// All points within `radius` (inclusive), ascending by (distance, index).
    [[nodiscard]] std::vector<Neighbor> radius_search(const Vec3 &query, double radius) const;

    [[nodiscard]] std::size_t size() const { return points_.size(); }
    [[nodiscard]] const std::vector<Vec3> &points() const { return points_; }

private:
    struct Node {
        std::size_t begin = 0, end = 0;  // range into order_
        int axis = -1;                   // -1 for leaves
        double split = 0.0;
        std::size_t left = 0, right = 0;
        Box box;
    };

    std::size_t build(std::size_t begin, std::size_t end);

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::size_t leaf_size_;
};

/// Convenience wrapper: builds a temporary tree and answers one query.
std::vector<Neighbor> knn(const std::vector<Vec3> &points, const Vec3 &query, std::size_t k);

}  // namespace gpgmm
