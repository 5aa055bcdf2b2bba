#include "ctsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "ctsplat/parallel.hpp"

namespace ctsplat {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

std::optional<SplatProjection> project_one(const Gaussian& g, int index, const CameraPose& pose,
                                           int width, int height) {
    const Eigen::Vector3d x_cam = pose.rotation * (g.position - pose.camera_center);
    if (!(x_cam.z() > pose.near_plane)) return std::nullopt;

    SplatProjection sp;
    sp.gaussian_index = index;
    sp.depth = x_cam.z();
    sp.alpha_peak = sigmoid(g.opacity_logit);
    sp.intensity = g.intensity;
    if (sp.alpha_peak < kAlphaMin) return std::nullopt;

    sp.mean2d.x() = pose.fx * x_cam.x() / x_cam.z() + pose.cx;
    sp.mean2d.y() = pose.fy * x_cam.y() / x_cam.z() + pose.cy;

    const Eigen::Matrix<double, 2, 3> jac = projection_jacobian(pose, x_cam);
    const Eigen::Matrix3d cov_cam =
        pose.rotation * covariance_world(g) * pose.rotation.transpose();
    sp.cov2d = jac * cov_cam * jac.transpose();
    sp.cov2d += kCovDilation * Eigen::Matrix2d::Identity();

    if (!sp.cov2d.allFinite() || !sp.mean2d.allFinite()) {
        throw std::invalid_argument("project_gaussians: non-finite projection for gaussian " +
                                    std::to_string(index));
    }
    sp.conic = sp.cov2d.inverse();

    // Integer pixels inside the 3-sigma bounding box, intersected with the
    // image. The pre-clamp comparisons run in double so oversized boxes
    // cannot overflow the int casts.
    const double rx = 3.0 * std::sqrt(sp.cov2d(0, 0));
    const double ry = 3.0 * std::sqrt(sp.cov2d(1, 1));
    const double x0f = sp.mean2d.x() - rx, x1f = sp.mean2d.x() + rx;
    const double y0f = sp.mean2d.y() - ry, y1f = sp.mean2d.y() + ry;
    if (x0f > width - 1.0 || x1f < 0.0 || y0f > height - 1.0 || y1f < 0.0) return std::nullopt;
    sp.x0 = static_cast<int>(std::ceil(std::max(x0f, 0.0)));
    sp.x1 = static_cast<int>(std::floor(std::min(x1f, width - 1.0)));
    sp.y0 = static_cast<int>(std::ceil(std::max(y0f, 0.0)));
    sp.y1 = static_cast<int>(std::floor(std::min(y1f, height - 1.0)));
    if (sp.x0 > sp.x1 || sp.y0 > sp.y1) return std::nullopt;
    sp.tx0 = sp.x0 / kTileSize;
    sp.tx1 = sp.x1 / kTileSize;
    sp.ty0 = sp.y0 / kTileSize;
    sp.ty1 = sp.y1 / kTileSize;
    return sp;
}

// Per-tile splat lists. Lists hold indices into the depth-sorted splat
// vector in ascending order, so each list is itself depth-sorted.
struct TileGrid {
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<std::int32_t>> lists;

    TileGrid(const std::vector<SplatProjection>& splats, int width, int height) {
        tiles_x = (width + kTileSize - 1) / kTileSize;
        tiles_y = (height + kTileSize - 1) / kTileSize;
        lists.resize(static_cast<std::size_t>(tiles_x) * tiles_y);
        for (std::size_t s = 0; s < splats.size(); ++s) {
            const SplatProjection& sp = splats[s];
            for (int ty = sp.ty0; ty <= sp.ty1; ++ty) {
                for (int tx = sp.tx0; tx <= sp.tx1; ++tx) {
                    lists[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(
                        static_cast<std::int32_t>(s));
                }
            }
        }
    }
};

}  // namespace

std::vector<SplatProjection> project_gaussians(const GaussianCloud& cloud,
                                               const CameraPose& pose, int width, int height) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("project_gaussians: image dimensions must be positive");
    }
    std::vector<SplatProjection> splats;
    splats.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (auto sp = project_one(cloud.gaussians[i], static_cast<int>(i), pose, width, height)) {
            splats.push_back(*sp);
        }
    }
    std::sort(splats.begin(), splats.end(), [](const SplatProjection& a, const SplatProjection& b) {
        return a.depth != b.depth ? a.depth < b.depth : a.gaussian_index < b.gaussian_index;
    });
    return splats;
}

ProjectionImage render(const GaussianCloud& cloud, const CameraPose& pose, int width,
                       int height, double background) {
    const std::vector<SplatProjection> splats = project_gaussians(cloud, pose, width, height);
    const TileGrid grid(splats, width, height);

    ProjectionImage img(width, height);
    img.view_angle_deg = pose.view_angle_deg;
    img.opacity.emplace(img.pixel_count(), 0.0);

    parallel_for(0, grid.tiles_x * grid.tiles_y, [&](int t) {
        const auto& list = grid.lists[t];
        const int px0 = (t % grid.tiles_x) * kTileSize;
        const int py0 = (t / grid.tiles_x) * kTileSize;
        const int px1 = std::min(px0 + kTileSize, width);
        const int py1 = std::min(py0 + kTileSize, height);
        for (int py = py0; py < py1; ++py) {
            for (int px = px0; px < px1; ++px) {
                double transmit = 1.0;
                double color = 0.0;
                for (const std::int32_t s : list) {
                    const SplatProjection& sp = splats[s];
                    if (px < sp.x0 || px > sp.x1 || py < sp.y0 || py > sp.y1) continue;
                    const double dx = px - sp.mean2d.x();
                    const double dy = py - sp.mean2d.y();
                    const double m = sp.conic(0, 0) * dx * dx + 2.0 * sp.conic(0, 1) * dx * dy +
                                     sp.conic(1, 1) * dy * dy;
                    const double alpha =
                        std::min(kAlphaCap, sp.alpha_peak * std::exp(-0.5 * m));
                    if (alpha < kAlphaMin) continue;
                    const double next_transmit = transmit * (1.0 - alpha);
                    if (next_transmit < kTransmittanceFloor) break;
                    color += sp.intensity * alpha * transmit;
                    transmit = next_transmit;
                }
                img.at(px, py) = color + background * transmit;
                (*img.opacity)[static_cast<std::size_t>(py) * width + px] = 1.0 - transmit;
            }
        }
    });
    return img;
}

void GradientBuffer::resize_zero(std::size_t n) {
    d_position.assign(n, Eigen::Vector3d::Zero());
    d_log_scale.assign(n, Eigen::Vector3d::Zero());
    d_rotation.assign(n, Eigen::Vector4d::Zero());
    d_opacity_logit.assign(n, 0.0);
    d_intensity.assign(n, 0.0);
    mean2d_grad_norm.assign(n, 0.0);
    hit.assign(n, 0);
}

namespace {

// Running sums of one splat's gradient contributions within one tile.
// The q components use the full-matrix convention for d(loss)/d(conic):
// q01 is the value of both off-diagonal entries.
struct SplatAcc {
    double mux = 0, muy = 0;
    double q00 = 0, q01 = 0, q11 = 0;
    double a = 0;
    double intensity = 0;
};

struct Contribution {
    std::int32_t slot;  // index into the tile list
    double alpha;
    double t_before;
};

}  // namespace

GradientBuffer render_backward(const GaussianCloud& cloud, const CameraPose& pose, int width,
                               int height, const std::vector<double>& d_pixels,
                               const std::vector<double>& d_opacity, double background) {
    const std::size_t n_px = static_cast<std::size_t>(width) * height;
    if (d_pixels.size() != n_px) {
        throw std::invalid_argument("render_backward: d_pixels size does not match image");
    }
    if (!d_opacity.empty() && d_opacity.size() != n_px) {
        throw std::invalid_argument("render_backward: d_opacity size does not match image");
    }
    for (double v : d_pixels) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("render_backward: non-finite pixel gradient input");
        }
    }
    for (double v : d_opacity) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("render_backward: non-finite opacity gradient input");
        }
    }

    const std::vector<SplatProjection> splats = project_gaussians(cloud, pose, width, height);
    const TileGrid grid(splats, width, height);
    const int n_tiles = grid.tiles_x * grid.tiles_y;

    // Stage 1: per-tile partial sums over that tile's pixels. Tiles are
    // independent, and each tile walks its pixels in row-major order, so the
    // partials do not depend on scheduling.
    std::vector<std::vector<SplatAcc>> tile_accs(n_tiles);
    parallel_for(0, n_tiles, [&](int t) {
        const auto& list = grid.lists[t];
        if (list.empty()) return;
        auto& accs = tile_accs[t];
        accs.assign(list.size(), SplatAcc{});

        const int px0 = (t % grid.tiles_x) * kTileSize;
        const int py0 = (t / grid.tiles_x) * kTileSize;
        const int px1 = std::min(px0 + kTileSize, width);
        const int py1 = std::min(py0 + kTileSize, height);
        std::vector<Contribution> stack;
        stack.reserve(list.size());

        for (int py = py0; py < py1; ++py) {
            for (int px = px0; px < px1; ++px) {
                const std::size_t p = static_cast<std::size_t>(py) * width + px;
                const double g_c = d_pixels[p];
                const double g_o = d_opacity.empty() ? 0.0 : d_opacity[p];
                if (g_c == 0.0 && g_o == 0.0) continue;

                // Forward replay of the compositing semantics, recording the
                // transmittance in front of every composited splat.
                stack.clear();
                double transmit = 1.0;
                for (std::size_t k = 0; k < list.size(); ++k) {
                    const SplatProjection& sp = splats[list[k]];
                    if (px < sp.x0 || px > sp.x1 || py < sp.y0 || py > sp.y1) continue;
                    const double dx = px - sp.mean2d.x();
                    const double dy = py - sp.mean2d.y();
                    const double m = sp.conic(0, 0) * dx * dx + 2.0 * sp.conic(0, 1) * dx * dy +
                                     sp.conic(1, 1) * dy * dy;
                    const double alpha =
                        std::min(kAlphaCap, sp.alpha_peak * std::exp(-0.5 * m));
                    if (alpha < kAlphaMin) continue;
                    const double next_transmit = transmit * (1.0 - alpha);
                    if (next_transmit < kTransmittanceFloor) break;
                    stack.push_back({static_cast<std::int32_t>(k), alpha, transmit});
                    transmit = next_transmit;
                }
                const double t_end = transmit;
                const double d_t_end = g_c * background - g_o;

                // Back-to-front pass: suffix holds the composited color of
                // everything behind the current splat.
                double suffix = 0.0;
                for (std::size_t r = stack.size(); r-- > 0;) {
                    const Contribution& e = stack[r];
                    const SplatProjection& sp = splats[list[e.slot]];
                    SplatAcc& acc = accs[e.slot];
                    const double one_minus = 1.0 - e.alpha;

                    acc.intensity += g_c * e.alpha * e.t_before;
                    const double d_alpha = g_c * sp.intensity * e.t_before -
                                           (g_c * suffix + d_t_end * t_end) / one_minus;
                    suffix += sp.intensity * e.alpha * e.t_before;

                    if (e.alpha >= kAlphaCap) continue;  // flat region of the cap
                    const double gauss = e.alpha / sp.alpha_peak;
                    acc.a += d_alpha * gauss;
                    const double d_m = d_alpha * sp.alpha_peak * gauss * -0.5;
                    const double dx = px - sp.mean2d.x();
                    const double dy = py - sp.mean2d.y();
                    const double qdx = sp.conic(0, 0) * dx + sp.conic(0, 1) * dy;
                    const double qdy = sp.conic(0, 1) * dx + sp.conic(1, 1) * dy;
                    acc.mux += d_m * -2.0 * qdx;
                    acc.muy += d_m * -2.0 * qdy;
                    acc.q00 += d_m * dx * dx;
                    acc.q01 += d_m * dx * dy;
                    acc.q11 += d_m * dy * dy;
                }
            }
        }
    });

    // Fixed-order reduction of the tile partials; this is the only cross-tile
    // accumulation, so the full backward pass is scheduling-independent.
    std::vector<SplatAcc> total(splats.size());
    for (int t = 0; t < n_tiles; ++t) {
        const auto& list = grid.lists[t];
        const auto& accs = tile_accs[t];
        for (std::size_t k = 0; k < accs.size(); ++k) {
            SplatAcc& dst = total[list[k]];
            const SplatAcc& src = accs[k];
            dst.mux += src.mux;
            dst.muy += src.muy;
            dst.q00 += src.q00;
            dst.q01 += src.q01;
            dst.q11 += src.q11;
            dst.a += src.a;
            dst.intensity += src.intensity;
        }
    }

    // Stage 2: chain the screen-space sums through the projection to the
    // Gaussian parameters. Splats own disjoint output rows.
    GradientBuffer buf;
    buf.resize_zero(cloud.size());
    parallel_for(0, static_cast<int>(splats.size()), [&](int si) {
        const SplatProjection& sp = splats[si];
        const SplatAcc& acc = total[si];
        const int gi = sp.gaussian_index;
        const Gaussian& g = cloud.gaussians[gi];

        buf.hit[gi] = 1;
        buf.d_intensity[gi] = acc.intensity;
        buf.d_opacity_logit[gi] = acc.a * sp.alpha_peak * (1.0 - sp.alpha_peak);

        const Eigen::Vector2d d_mu(acc.mux, acc.muy);
        buf.mean2d_grad_norm[gi] = d_mu.norm();

        const Eigen::Matrix3d& w_rot = pose.rotation;
        const Eigen::Vector3d x_cam = w_rot * (g.position - pose.camera_center);
        const double z = x_cam.z(), z2 = z * z, z3 = z2 * z;
        const Eigen::Matrix<double, 2, 3> jac = projection_jacobian(pose, x_cam);
        const Eigen::Matrix3d rot3 = quat_to_rotation(g.rotation);
        const Eigen::Vector3d s2 = (2.0 * g.log_scale).array().exp();
        const Eigen::Matrix3d sigma3 = rot3 * s2.asDiagonal() * rot3.transpose();
        const Eigen::Matrix3d cov_cam = w_rot * sigma3 * w_rot.transpose();

        Eigen::Matrix2d d_conic;
        d_conic << acc.q00, acc.q01, acc.q01, acc.q11;
        const Eigen::Matrix2d d_cov2d = -(sp.conic * d_conic * sp.conic);
        const Eigen::Matrix<double, 2, 3> d_jac = 2.0 * d_cov2d * jac * cov_cam;
        const Eigen::Matrix3d d_cov_cam = jac.transpose() * d_cov2d * jac;
        const Eigen::Matrix3d d_sigma3 = w_rot.transpose() * d_cov_cam * w_rot;

        // Position feels the camera-space mean through both the projected
        // center and the Jacobian evaluated at that center.
        Eigen::Vector3d d_xc = jac.transpose() * d_mu;
        d_xc.x() += d_jac(0, 2) * (-pose.fx / z2);
        d_xc.y() += d_jac(1, 2) * (-pose.fy / z2);
        d_xc.z() += d_jac(0, 0) * (-pose.fx / z2) + d_jac(1, 1) * (-pose.fy / z2) +
                    d_jac(0, 2) * (2.0 * pose.fx * x_cam.x() / z3) +
                    d_jac(1, 2) * (2.0 * pose.fy * x_cam.y() / z3);
        buf.d_position[gi] = w_rot.transpose() * d_xc;

        const Eigen::Matrix3d d_axes = rot3.transpose() * d_sigma3 * rot3;
        for (int k = 0; k < 3; ++k) {
            buf.d_log_scale[gi][k] = d_axes(k, k) * 2.0 * s2[k];
        }

        const Eigen::Matrix3d d_rot = 2.0 * d_sigma3 * rot3 * s2.asDiagonal();
        const double qn = g.rotation.norm();
        const Eigen::Vector4d qh = g.rotation / qn;
        const double qw = qh[0], qx = qh[1], qy = qh[2], qz = qh[3];
        Eigen::Vector4d d_qh;
        d_qh[0] = 2.0 * (d_rot(0, 1) * -qz + d_rot(0, 2) * qy + d_rot(1, 0) * qz +
                         d_rot(1, 2) * -qx + d_rot(2, 0) * -qy + d_rot(2, 1) * qx);
        d_qh[1] = 2.0 * (d_rot(0, 1) * qy + d_rot(0, 2) * qz + d_rot(1, 0) * qy +
                         d_rot(1, 1) * -2.0 * qx + d_rot(1, 2) * -qw + d_rot(2, 0) * qz +
                         d_rot(2, 1) * qw + d_rot(2, 2) * -2.0 * qx);
        d_qh[2] = 2.0 * (d_rot(0, 0) * -2.0 * qy + d_rot(0, 1) * qx + d_rot(0, 2) * qw +
                         d_rot(1, 0) * qx + d_rot(1, 2) * qz + d_rot(2, 0) * -qw +
                         d_rot(2, 1) * qz + d_rot(2, 2) * -2.0 * qy);
        d_qh[3] = 2.0 * (d_rot(0, 0) * -2.0 * qz + d_rot(0, 1) * -qw + d_rot(0, 2) * qx +
                         d_rot(1, 0) * qw + d_rot(1, 1) * -2.0 * qz + d_rot(1, 2) * qy +
                         d_rot(2, 0) * qx + d_rot(2, 1) * qy);
        buf.d_rotation[gi] =
            (Eigen::Matrix4d::Identity() - qh * qh.transpose()) * d_qh / qn;
    });

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const bool finite = buf.d_position[i].allFinite() && buf.d_log_scale[i].allFinite() &&
                            buf.d_rotation[i].allFinite() &&
                            std::isfinite(buf.d_opacity_logit[i]) &&
                            std::isfinite(buf.d_intensity[i]);
        if (!finite) {
            throw std::invalid_argument("render_backward: non-finite gradient for gaussian " +
                                        std::to_string(i));
        }
    }
    return buf;
}

}  // namespace ctsplat
