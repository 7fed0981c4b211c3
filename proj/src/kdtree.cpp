#include "gpgmm/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <utility>

namespace gpgmm {

namespace {

// Lexicographic (squared distance, index): the ordering that defines ties.
using Candidate = std::pair<double, std::size_t>;

double box_sq_distance(const Box &b, const Vec3 &q) {
    return (q - b.clamp(q)).squaredNorm();
}

}  // namespace

KdTree::KdTree(std::vector<Vec3> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
        build(0, points_.size());
    }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    Box box{points_[order_[begin]], points_[order_[begin]]};
    for (std::size_t i = begin; i < end; ++i) {
        box.min = box.min.cwiseMin(points_[order_[i]]);
        box.max = box.max.cwiseMax(points_[order_[i]]);
    }
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    nodes_[id].box = box;
    if (end - begin <= leaf_size_) return id;

    Eigen::Index axis;
    box.extent().maxCoeff(&axis);
    if (box.extent()[axis] <= 0.0) return id;  // all coincident
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                         const double pa = points_[a][axis], pb = points_[b][axis];
                         return pa < pb || (pa == pb && a < b);
                     });
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = static_cast<int>(axis);
    nodes_[id].split = points_[order_[mid]][axis];
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<Neighbor> KdTree::knn(const Vec3 &query, std::size_t k) const {
    if (k > points_.size()) {
        throw ArgumentError("knn: k=" + std::to_string(k) + " exceeds " + std::to_string(points_.size()) +
                            " points");
    }
    std::vector<Neighbor> result;
    if (k == 0) return result;

    // Max-heap on (d2, index): top is the current worst of the best k.
    std::priority_queue<Candidate> best;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const Node &node = nodes_[stack.back()];
        stack.pop_back();
        if (best.size() == k && box_sq_distance(node.box, query) > best.top().first) continue;
        if (node.axis < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const std::size_t idx = order_[i];
                const Candidate c{(points_[idx] - query).squaredNorm(), idx};
                if (best.size() < k) {
                    best.push(c);
                } else if (c < best.top()) {
                    best.pop();
                    best.push(c);
                }
            }
            continue;
        }
        // Visit the nearer child first (pushed last).
        const bool go_left = query[node.axis] < node.split;
        stack.push_back(go_left ? node.right : node.left);
        stack.push_back(go_left ? node.left : node.right);
    }
    std::vector<Candidate> sorted;
    sorted.reserve(best.size());
    while (!best.empty()) {
        sorted.push_back(best.top());
        best.pop();
    }
    std::sort(sorted.begin(), sorted.end());
    result.reserve(sorted.size());
    for (const auto &[d2, idx] : sorted) result.push_back({idx, std::sqrt(d2)});
    return result;
}

std::vector<Neighbor> KdTree::radius_search(const Vec3 &query, double radius) const {
    std::vector<Candidate> hits;
    if (points_.empty()) return {};
    const double r2 = radius * radius;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const Node &node = nodes_[stack.back()];
        stack.pop_back();
        if (box_sq_distance(node.box, query) > r2) continue;
        if (node.axis < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const std::size_t idx = order_[i];
                const double d2 = (points_[idx] - query).squaredNorm();
                if (d2 <= r2) hits.emplace_back(d2, idx);
            }
            continue;
        }
        stack.push_back(node.left);
        stack.push_back(node.right);
    }
    std::sort(hits.begin(), hits.end());
    std::vector<Neighbor> result;
    result.reserve(hits.size());
    for (const auto &[d2, idx] : hits) result.push_back({idx, std::sqrt(d2)});
    return result;
}

std::vector<Neighbor> knn(const std::vector<Vec3> &points, const Vec3 &query, std::size_t k) {
    if (k > points.size()) {
        throw ArgumentError("knn: k=" + std::to_string(k) + " exceeds " + std::to_string(points.size()) +
                            " points");
    }
    return KdTree(points).knn(query, k);
}

}  // namespace gpgmm
