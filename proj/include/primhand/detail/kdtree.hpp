#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "primhand/errors.hpp"

namespace primhand::detail {

// Static 3-d kd-tree for exact nearest-neighbor queries. Distances are plain
// squaredNorm() of the difference, identical to what a linear scan computes,
// and pruning only skips subtrees that provably cannot beat the current best,
// so the returned minimum matches an exhaustive scan bit-for-bit.
class KdTree3 {
   public:
    KdTree3() = default;

    explicit KdTree3(std::vector<Eigen::Vector3d> pts) : pts_(std::move(pts)) {
        if (pts_.empty()) throw ValidationError("kd-tree needs at least one point");
        idx_.resize(pts_.size());
        std::iota(idx_.begin(), idx_.end(), 0);
        nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
        root_ = build(0, static_cast<int>(pts_.size()));
    }

    std::size_t size() const { return pts_.size(); }
    const std::vector<Eigen::Vector3d>& points() const { return pts_; }

    double nearest_sq(const Eigen::Vector3d& q) const { return nearest_sq_excluding(q, -1); }

    double nearest(const Eigen::Vector3d& q) const { return std::sqrt(nearest_sq(q)); }

    // Nearest squared distance ignoring the point with original index `skip`
    // (pass -1 to consider all points). Used for self-spacing queries.
    double nearest_sq_excluding(const Eigen::Vector3d& q, int skip) const {
        double best = std::numeric_limits<double>::infinity();
        search(root_, q, skip, best);
        return best;
    }

    // Largest gap from any point to its closest neighbor; the resolution of
    // the sampled surface.
    double max_nn_spacing() const {
        if (pts_.size() < 2) throw ValidationError("spacing needs at least two points");
        double worst = 0.0;
        for (std::size_t i = 0; i < pts_.size(); ++i)
            worst = std::max(worst, nearest_sq_excluding(pts_[i], static_cast<int>(i)));
        return std::sqrt(worst);
    }

   private:
    static constexpr int kLeafSize = 16;

    struct Node {
        double split = 0.0;
        int axis = -1;       // -1 marks a leaf
        int left = -1;       // child node, or range begin for leaves
        int right = -1;      // child node, or range end for leaves
    };

    int build(int lo, int hi) {
        Node node;
        if (hi - lo <= kLeafSize) {
            node.left = lo;
            node.right = hi;
            nodes_.push_back(node);
            return static_cast<int>(nodes_.size()) - 1;
        }
        Eigen::Vector3d mn = pts_[idx_[static_cast<std::size_t>(lo)]];
        Eigen::Vector3d mx = mn;
        for (int i = lo + 1; i < hi; ++i) {
            const auto& p = pts_[idx_[static_cast<std::size_t>(i)]];
            mn = mn.cwiseMin(p);
            mx = mx.cwiseMax(p);
        }
        int axis = 0;
        (mx - mn).maxCoeff(&axis);
        const int mid = lo + (hi - lo) / 2;
        std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                         [&](int a, int b) {
                             return pts_[static_cast<std::size_t>(a)][axis] <
                                    pts_[static_cast<std::size_t>(b)][axis];
                         });
        node.axis = axis;
        node.split = pts_[static_cast<std::size_t>(idx_[static_cast<std::size_t>(mid)])][axis];
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int l = build(lo, mid + 1);
        const int r = build(mid + 1, hi);
        nodes_[static_cast<std::size_t>(self)].left = l;
        nodes_[static_cast<std::size_t>(self)].right = r;
        return self;
    }

    void search(int ni, const Eigen::Vector3d& q, int skip, double& best) const {
        const Node& node = nodes_[static_cast<std::size_t>(ni)];
        if (node.axis < 0) {
            for (int i = node.left; i < node.right; ++i) {
                const int pi = idx_[static_cast<std::size_t>(i)];
                if (pi == skip) continue;
                best = std::min(best, (pts_[static_cast<std::size_t>(pi)] - q).squaredNorm());
            }
            return;
        }
        const double diff = q[node.axis] - node.split;
        const int near = diff < 0 ? node.left : node.right;
        const int far = diff < 0 ? node.right : node.left;
        search(near, q, skip, best);
        if (diff * diff < best) search(far, q, skip, best);
    }

    std::vector<Eigen::Vector3d> pts_;
    std::vector<int> idx_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace primhand::detail
