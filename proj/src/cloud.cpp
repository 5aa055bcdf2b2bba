#include "ctsplat/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctsplat/rng.hpp"

namespace ctsplat {

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q) {
    const double norm = q.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw std::invalid_argument("quat_to_rotation: quaternion norm must be positive");
    }
    const double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm, z = q[3] / norm;
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Eigen::Matrix3d covariance_world(const Gaussian& g) {
    const Eigen::Matrix3d r = quat_to_rotation(g.rotation);
    const Eigen::Vector3d s2 = (2.0 * g.log_scale).array().exp();
    return r * s2.asDiagonal() * r.transpose();
}

namespace {

// Uniform hash grid used for the 3-nearest-neighbor query at initialization.
// Cells are sized near the expected point spacing so the expanding-ring
// search below terminates after one or two rings in the common case.
class NeighborGrid {
public:
    NeighborGrid(const std::vector<Eigen::Vector3d>& points, double cell)
        : points_(points), cell_(cell) {
        lo_ = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
        for (const auto& p : points) lo_ = lo_.cwiseMin(p);
        dims_ = Eigen::Vector3i::Zero();
        keys_.resize(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            const Eigen::Vector3i c = cell_of(points[i]);
            dims_ = dims_.cwiseMax(c + Eigen::Vector3i::Ones());
            keys_[i] = c;
        }
        buckets_.resize(static_cast<std::size_t>(dims_.x()) * dims_.y() * dims_.z());
        for (std::size_t i = 0; i < points.size(); ++i) {
            buckets_[flat(keys_[i])].push_back(static_cast<int>(i));
        }
    }

    // Mean distance from points[self] to its k nearest other points.
    double mean_knn_distance(std::size_t self, int k) const {
        std::vector<double> best;  // squared distances, ascending
        const Eigen::Vector3i home = keys_[self];
        const int max_ring = dims_.maxCoeff();
        for (int ring = 0; ring <= max_ring; ++ring) {
            scan_ring(self, home, ring, k, best);
            // Points in farther rings are at least (ring * cell) away, so the
            // current k-th best is final once it beats that bound.
            if (static_cast<int>(best.size()) >= k && ring > 0) {
                const double bound = (ring * cell_) * (ring * cell_);
                if (best[k - 1] <= bound) break;
            }
        }
        double sum = 0.0;
        const int n = std::min<int>(k, static_cast<int>(best.size()));
        for (int i = 0; i < n; ++i) sum += std::sqrt(best[i]);
        return n > 0 ? sum / n : 0.0;
    }

private:
    Eigen::Vector3i cell_of(const Eigen::Vector3d& p) const {
        return ((p - lo_) / cell_).array().floor().cast<int>().matrix();
    }

    std::size_t flat(const Eigen::Vector3i& c) const {
        return (static_cast<std::size_t>(c.z()) * dims_.y() + c.y()) * dims_.x() + c.x();
    }

    void scan_ring(std::size_t self, const Eigen::Vector3i& home, int ring, int k,
                   std::vector<double>& best) const {
        for (int dz = -ring; dz <= ring; ++dz) {
            for (int dy = -ring; dy <= ring; ++dy) {
                for (int dx = -ring; dx <= ring; ++dx) {
                    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
                    const Eigen::Vector3i c = home + Eigen::Vector3i(dx, dy, dz);
                    if ((c.array() < 0).any() || (c.array() >= dims_.array()).any()) continue;
                    for (int j : buckets_[flat(c)]) {
                        if (static_cast<std::size_t>(j) == self) continue;
                        const double d2 = (points_[j] - points_[self]).squaredNorm();
                        auto it = std::lower_bound(best.begin(), best.end(), d2);
                        best.insert(it, d2);
                        if (static_cast<int>(best.size()) > k) best.resize(k);
                    }
                }
            }
        }
    }

    const std::vector<Eigen::Vector3d>& points_;
    double cell_;
    Eigen::Vector3d lo_;
    Eigen::Vector3i dims_;
    std::vector<Eigen::Vector3i> keys_;
    std::vector<std::vector<int>> buckets_;
};

}  // namespace

GaussianCloud init_ellipsoid_cloud(const Ellipsoid& region, int count, std::uint64_t seed,
                                   double base_opacity, double base_intensity) {
    if (count < 1) {
        throw std::invalid_argument("init_ellipsoid_cloud: count must be at least 1");
    }
    if (!(base_opacity > 0.0 && base_opacity < 1.0)) {
        throw std::invalid_argument("init_ellipsoid_cloud: base_opacity must lie in (0, 1)");
    }
    if (!(region.semi_axes.minCoeff() > 0.0)) {
        throw std::invalid_argument("init_ellipsoid_cloud: semi-axes must be positive");
    }

    GaussianCloud cloud;
    cloud.scene_extent = region.semi_axes.maxCoeff();

    // Uniform sampling inside the ellipsoid: rejection from the unit cube
    // onto the unit ball, then anisotropic scaling (which preserves
    // uniformity because the map is linear).
    Rng rng(seed);
    std::vector<Eigen::Vector3d> positions;
    positions.reserve(count);
    while (static_cast<int>(positions.size()) < count) {
        const Eigen::Vector3d u(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                                rng.uniform(-1.0, 1.0));
        if (u.squaredNorm() > 1.0) continue;
        positions.push_back(region.center + (u.array() * region.semi_axes.array()).matrix());
    }

    // Expected spacing of `count` uniform points in the ellipsoid volume.
    const double volume = 4.0 / 3.0 * 3.141592653589793 * region.semi_axes.prod();
    const double spacing = std::cbrt(volume / count);
    const NeighborGrid grid(positions, std::max(spacing, 1e-12));

    const double opacity_logit = std::log(base_opacity / (1.0 - base_opacity));
    cloud.gaussians.resize(count);
    for (int i = 0; i < count; ++i) {
        Gaussian& g = cloud.gaussians[i];
        g.position = positions[i];
        double dist = count > 1 ? grid.mean_knn_distance(i, std::min(3, count - 1))
                                : 0.05 * cloud.scene_extent;
        dist = std::clamp(dist, 1e-4, cloud.scene_extent);
        g.log_scale = Eigen::Vector3d::Constant(std::log(dist));
        g.rotation = Eigen::Vector4d(1, 0, 0, 0);
        g.opacity_logit = opacity_logit;
        g.intensity = base_intensity;
    }
    return cloud;
}

}  // namespace ctsplat
