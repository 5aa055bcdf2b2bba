#include "ctsplat/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctsplat/parallel.hpp"
#include "ctsplat/rng.hpp"

namespace ctsplat {

std::vector<PhantomComponent> head_phantom_components(double fov_side, std::uint64_t seed) {
    if (!(fov_side > 0.0)) {
        throw std::invalid_argument("head_phantom_components: fov_side must be positive");
    }
    Rng rng(seed);
    std::vector<PhantomComponent> parts;

    // Skull: hollow shell with a margin inside the field of view so every
    // projection ray enters through zero-valued voxels.
    const Eigen::Vector3d skull = Eigen::Vector3d(0.38, 0.38, 0.48) * fov_side;
    parts.push_back({Eigen::Vector3d::Zero(), skull, 0.86, 0.80});

    // Brain: solid interior slightly separated from the shell.
    const Eigen::Vector3d brain = 0.84 * skull;
    parts.push_back({Eigen::Vector3d::Zero(), brain, 0.0, 0.22});

    // Inclusions: 3 to 5 small ellipsoids kept strictly inside the brain.
    const int n_inclusions = 3 + static_cast<int>(rng.index(3));
    for (int i = 0; i < n_inclusions; ++i) {
        PhantomComponent inc;
        inc.semi_axes = Eigen::Vector3d(rng.uniform(0.04, 0.10), rng.uniform(0.04, 0.10),
                                        rng.uniform(0.04, 0.10)) *
                        fov_side;
        // Center sampled so that center + semi_axes stays within 0.9 * brain
        // along each axis, which bounds the inclusion inside the brain.
        Eigen::Vector3d limit = 0.9 * brain - inc.semi_axes;
        limit = limit.cwiseMax(Eigen::Vector3d::Zero());
        const double frac = 1.0 / std::sqrt(3.0);  // keep the ellipsoidal radius under 0.9
        inc.center = Eigen::Vector3d(rng.uniform(-1.0, 1.0) * frac * limit.x(),
                                     rng.uniform(-1.0, 1.0) * frac * limit.y(),
                                     rng.uniform(-1.0, 1.0) * frac * limit.z());
        inc.value = rng.uniform(0.15, 0.35);
        parts.push_back(inc);
    }
    return parts;
}

double phantom_value_at(const std::vector<PhantomComponent>& components,
                        const Eigen::Vector3d& world) {
    double sum = 0.0;
    for (const auto& c : components) {
        const Eigen::Vector3d rel = (world - c.center).array() / c.semi_axes.array();
        const double rho = rel.norm();
        if (rho <= 1.0 && rho >= c.inner_fraction) sum += c.value;
    }
    return std::clamp(sum, 0.0, 1.0);
}

VoxelPhantom make_head_phantom(const Eigen::Vector3i& dims, double fov_side,
                               std::uint64_t seed) {
    if ((dims.array() < 1).any()) {
        throw std::invalid_argument("make_head_phantom: dims must be positive");
    }
    if (!(fov_side > 0.0)) {
        throw std::invalid_argument("make_head_phantom: fov_side must be positive");
    }
    const auto parts = head_phantom_components(fov_side, seed);

    VoxelPhantom ph;
    ph.dims = dims;
    ph.spacing = Eigen::Vector3d::Constant(fov_side).array() / dims.cast<double>().array();
    // Voxel centers span the field of view symmetrically about the isocenter.
    ph.origin = -0.5 * fov_side * Eigen::Vector3d::Ones() + 0.5 * ph.spacing;
    ph.values.resize(static_cast<std::size_t>(dims.x()) * dims.y() * dims.z());

    parallel_for(0, dims.z(), [&](int k) {
        for (int j = 0; j < dims.y(); ++j) {
            for (int i = 0; i < dims.x(); ++i) {
                const Eigen::Vector3d p =
                    ph.origin + (Eigen::Vector3d(i, j, k).array() * ph.spacing.array()).matrix();
                ph.at(i, j, k) = phantom_value_at(parts, p);
            }
        }
    });
    return ph;
}

double sample_trilinear(const VoxelPhantom& ph, const Eigen::Vector3d& world) {
    const Eigen::Vector3d f = (world - ph.origin).array() / ph.spacing.array();
    if ((f.array() < 0.0).any() ||
        (f.array() > (ph.dims.cast<double>().array() - 1.0)).any()) {
        return 0.0;
    }
    const int i0 = std::min(static_cast<int>(f.x()), ph.dims.x() - 2 < 0 ? 0 : ph.dims.x() - 2);
    const int j0 = std::min(static_cast<int>(f.y()), ph.dims.y() - 2 < 0 ? 0 : ph.dims.y() - 2);
    const int k0 = std::min(static_cast<int>(f.z()), ph.dims.z() - 2 < 0 ? 0 : ph.dims.z() - 2);
    const double fx = std::clamp(f.x() - i0, 0.0, 1.0);
    const double fy = std::clamp(f.y() - j0, 0.0, 1.0);
    const double fz = std::clamp(f.z() - k0, 0.0, 1.0);
    const int i1 = std::min(i0 + 1, ph.dims.x() - 1);
    const int j1 = std::min(j0 + 1, ph.dims.y() - 1);
    const int k1 = std::min(k0 + 1, ph.dims.z() - 1);

    const double c00 = ph.at(i0, j0, k0) * (1 - fx) + ph.at(i1, j0, k0) * fx;
    const double c10 = ph.at(i0, j1, k0) * (1 - fx) + ph.at(i1, j1, k0) * fx;
    const double c01 = ph.at(i0, j0, k1) * (1 - fx) + ph.at(i1, j0, k1) * fx;
    const double c11 = ph.at(i0, j1, k1) * (1 - fx) + ph.at(i1, j1, k1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

namespace {

// Clips the ray origin + t * dir to the voxel-center hull. Returns false when
// the ray misses it.
bool clip_to_hull(const VoxelPhantom& ph, const Eigen::Vector3d& origin,
                  const Eigen::Vector3d& dir, double& t0, double& t1) {
    const Eigen::Vector3d lo = ph.origin;
    const Eigen::Vector3d hi =
        ph.origin + ((ph.dims.cast<double>().array() - 1.0) * ph.spacing.array()).matrix();
    t0 = 0.0;
    t1 = std::numeric_limits<double>::max();
    for (int a = 0; a < 3; ++a) {
        if (dir[a] == 0.0) {
            if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
            continue;
        }
        double ta = (lo[a] - origin[a]) / dir[a];
        double tb = (hi[a] - origin[a]) / dir[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t0 < t1;
}

}  // namespace

ProjectionImage drr_project_raw(const VoxelPhantom& ph, const CameraPose& pose,
                                const ScanGeometry& geom) {
    if (ph.values.empty()) {
        throw std::invalid_argument("drr_project_raw: phantom is empty");
    }
    const double step = 0.5 * ph.spacing.minCoeff();
    ProjectionImage img(geom.image_width, geom.image_height);
    img.view_angle_deg = pose.view_angle_deg;

    const Eigen::Matrix3d cam_to_world = pose.rotation.transpose();
    parallel_for(0, geom.image_height, [&](int iy) {
        for (int ix = 0; ix < geom.image_width; ++ix) {
            const Eigen::Vector3d dir_cam((ix - pose.cx) / pose.fx, (iy - pose.cy) / pose.fy, 1.0);
            const Eigen::Vector3d dir = (cam_to_world * dir_cam).normalized();
            double t0, t1;
            if (!clip_to_hull(ph, pose.camera_center, dir, t0, t1)) continue;
            const int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step)));
            const double dt = (t1 - t0) / n;
            double sum = 0.0;
            for (int s = 0; s < n; ++s) {
                sum += sample_trilinear(ph, pose.camera_center + (t0 + (s + 0.5) * dt) * dir);
            }
            img.at(ix, iy) = sum * dt;
        }
    });
    return img;
}

double scan_normalization_constant(const VoxelPhantom& ph, const ScanGeometry& geom) {
    double peak = 0.0;
    for (const CameraPose& pose : orbit_poses(geom)) {
        const ProjectionImage img = drr_project_raw(ph, pose, geom);
        for (double v : img.pixels) peak = std::max(peak, v);
    }
    if (!(peak > 0.0)) {
        throw std::invalid_argument(
            "scan_normalization_constant: phantom projects to all-zero images");
    }
    return peak;
}

ProjectionImage drr_project(const VoxelPhantom& ph, const CameraPose& pose,
                            const ScanGeometry& geom, double normalization) {
    if (!(normalization > 0.0)) {
        throw std::invalid_argument("drr_project: normalization must be positive");
    }
    ProjectionImage img = drr_project_raw(ph, pose, geom);
    for (double& v : img.pixels) v = std::min(v / normalization, 1.0);
    return img;
}

}  // namespace ctsplat
