// rasterizer.hpp: perspective splatting of the Gaussian cloud with
// front-to-back alpha compositing, plus the analytic adjoint used for
// training.
//
// Rendering semantics, frozen for every implementation and oracle:
//  - 2D covariance = J W Sigma W^T J^T truncated to 2x2, plus 0.3 * I.
//  - A splat contributes to exactly the integer pixels inside its 3-sigma
//    bounding box (per-axis radius 3 * sqrt(cov2d diagonal)).
//  - alpha = min(0.99, alpha_peak * exp(-0.5 * d^T cov2d^{-1} d)), where
//    d = pixel - mean2d; contributions with alpha < 1/255 are skipped.
//  - Splats composite front to back in (depth, gaussian_index) order; a
//    splat that would drop transmittance below 1e-4 is not composited and
//    ends the pixel.
//  - pixel = sum(intensity * alpha * T) + background * T_final, unclamped;
//    accumulated opacity = 1 - T_final.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ctsplat/cloud.hpp"
#include "ctsplat/geometry.hpp"
#include "ctsplat/image.hpp"

namespace ctsplat {

inline constexpr int kTileSize = 16;
inline constexpr double kCovDilation = 0.3;
inline constexpr double kAlphaCap = 0.99;
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kTransmittanceFloor = 1e-4;

// One Gaussian after projection into a view. x0..y1 are the inclusive pixel
// bounds of the 3-sigma box intersected with the image; tx0..ty1 the tiles
// those pixels span.
struct SplatProjection {
    int gaussian_index = 0;
    Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();  // dilated
    Eigen::Matrix2d conic = Eigen::Matrix2d::Identity();  // cov2d^{-1}
    double depth = 0.0;
    double alpha_peak = 0.0;  // sigmoid(opacity_logit)
    double intensity = 0.0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
    int tx0 = 0, tx1 = -1, ty0 = 0, ty1 = -1;
};

// Culls Gaussians behind the near plane, with alpha_peak < 1/255, or whose
// 3-sigma box misses the image; returns survivors sorted by
// (depth, gaussian_index) ascending. Throws std::invalid_argument when a
// Gaussian projects to non-finite values, naming its index.
std::vector<SplatProjection> project_gaussians(const GaussianCloud& cloud,
                                               const CameraPose& pose, int width, int height);

// Forward render. Pixels are the unclamped composited values (the losses
// consume these directly); the opacity map is always present. Deterministic:
// bit-identical for any worker count.
ProjectionImage render(const GaussianCloud& cloud, const CameraPose& pose, int width,
                       int height, double background = 0.0);

// Per-Gaussian parameter gradients plus the per-view screen-space statistics
// consumed by densification. Entries are indexed by gaussian index and are
// zero for Gaussians that were culled (hit == 0).
struct GradientBuffer {
    std::vector<Eigen::Vector3d> d_position;
    std::vector<Eigen::Vector3d> d_log_scale;
    std::vector<Eigen::Vector4d> d_rotation;
    std::vector<double> d_opacity_logit;
    std::vector<double> d_intensity;
    std::vector<double> mean2d_grad_norm;  // |dL/d mean2d| for this view
    std::vector<std::uint8_t> hit;         // 1 when the Gaussian reached the image

    void resize_zero(std::size_t n);
};

// Adjoint of render for the objective sum_p(d_pixels[p] * pixel[p] +
// d_opacity[p] * opacity[p]). d_opacity may be empty (treated as zeros).
// Accumulation is double precision with a fixed tile reduction order, so
// results are bit-identical for any worker count. Throws
// std::invalid_argument on non-finite inputs or gradients, naming the
// Gaussian where detection occurred.
GradientBuffer render_backward(const GaussianCloud& cloud, const CameraPose& pose, int width,
                               int height, const std::vector<double>& d_pixels,
                               const std::vector<double>& d_opacity,
                               double background = 0.0);

}  // namespace ctsplat
