// cloud.hpp: the optimizable scene representation, a cloud of anisotropic
// 3D Gaussians with scalar emission intensity.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace ctsplat {

// One Gaussian primitive, 12 scalar parameters. Scales are stored as logs
// and opacity as a logit so every unconstrained value is valid; rotation is
// a unit quaternion in (w, x, y, z) order.
struct Gaussian {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();   // world, mm
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();  // log of world std devs
    Eigen::Vector4d rotation = Eigen::Vector4d(1, 0, 0, 0);
    double opacity_logit = 0.0;
    double intensity = 0.0;

    double opacity() const { return 1.0 / (1.0 + std::exp(-opacity_logit)); }
    Eigen::Vector3d scale() const { return log_scale.array().exp(); }
};

struct GaussianCloud {
    std::vector<Gaussian> gaussians;
    // Radius of the bounding sphere of the initialization ellipsoid; learning
    // rates and densification thresholds are expressed relative to this.
    double scene_extent = 1.0;

    std::size_t size() const { return gaussians.size(); }
    bool empty() const { return gaussians.empty(); }
};

struct Ellipsoid {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d semi_axes = Eigen::Vector3d::Ones();
};

// Rotation matrix of a quaternion in (w, x, y, z) order. The quaternion is
// normalized internally, so callers may pass slightly denormalized values
// (e.g. finite-difference perturbations) and still get a proper rotation.
Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q);

// World-space covariance R diag(exp(log_scale)^2) R^T. Always symmetric
// positive definite; the smallest eigenvalue equals the smallest squared scale.
Eigen::Matrix3d covariance_world(const Gaussian& g);

// Uniformly seeds `count` Gaussians inside the ellipsoid. Every Gaussian is
// isotropic with log-scale log(mean distance to its 3 nearest neighbors),
// clamped to [1e-4, scene_extent], identity rotation, and the given opacity
// (entered through its logit) and intensity. Deterministic for a fixed seed.
// Throws std::invalid_argument for count < 1, base_opacity outside (0, 1),
// or non-positive semi-axes.
GaussianCloud init_ellipsoid_cloud(const Ellipsoid& region, int count, std::uint64_t seed,
                                   double base_opacity, double base_intensity);

}  // namespace ctsplat
