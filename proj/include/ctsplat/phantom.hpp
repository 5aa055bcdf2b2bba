// phantom.hpp: synthetic attenuation volumes and the ray-marched projector
// that turns them into normalized projection images.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ctsplat/geometry.hpp"
#include "ctsplat/image.hpp"

namespace ctsplat {

// Dense attenuation grid. values[(k * dims.y + j) * dims.x + i] is the sample
// at the center of voxel (i, j, k); that center sits at origin + (i,j,k) *
// spacing in world coordinates. All values lie in [0, 1].
struct VoxelPhantom {
    Eigen::Vector3i dims = Eigen::Vector3i::Zero();
    Eigen::Vector3d spacing = Eigen::Vector3d::Ones();  // mm per voxel step
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();   // world position of voxel (0,0,0) center
    std::vector<double> values;

    double at(int i, int j, int k) const {
        return values[(static_cast<std::size_t>(k) * dims.y() + j) * dims.x() + i];
    }
    double& at(int i, int j, int k) {
        return values[(static_cast<std::size_t>(k) * dims.y() + j) * dims.x() + i];
    }
};

// One ellipsoidal building block of the head phantom. A point at ellipsoidal
// radius rho (1 on the surface) contributes `value` when
// inner_fraction <= rho <= 1, so inner_fraction > 0 hollows out a shell.
struct PhantomComponent {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d semi_axes = Eigen::Vector3d::Ones();
    double inner_fraction = 0.0;
    double value = 0.0;
};

// Component list for a head-like phantom filling most of a cubic field of
// view of edge `fov_side`: a high-attenuation skull shell, a uniform brain
// interior, and 3 to 5 seed-placed ellipsoidal inclusions strictly inside
// the brain. Deterministic for a fixed seed.
std::vector<PhantomComponent> head_phantom_components(double fov_side, std::uint64_t seed);

// Sum of component values at a world point, clamped to [0, 1].
double phantom_value_at(const std::vector<PhantomComponent>& components,
                        const Eigen::Vector3d& world);

// Voxelizes head_phantom_components onto a dims grid spanning the field of
// view, voxel centers centered at the isocenter. Throws std::invalid_argument
// for non-positive dims or fov_side.
VoxelPhantom make_head_phantom(const Eigen::Vector3i& dims, double fov_side, std::uint64_t seed);

// Trilinear interpolation of the phantom at a world point; zero outside the
// voxel-center hull.
double sample_trilinear(const VoxelPhantom& ph, const Eigen::Vector3d& world);

// Additive line integral of the phantom along each pixel ray, midpoint rule
// with step 0.5 * min(spacing). No normalization; values are in mm-weighted
// attenuation. The image dimensions come from the pose-independent geometry.
ProjectionImage drr_project_raw(const VoxelPhantom& ph, const CameraPose& pose,
                                const ScanGeometry& geom);

// Largest raw line-integral value over the full orbit of `geom`; the shared
// normalization constant for every view of one scan. Throws
// std::invalid_argument if the phantom projects to all zeros.
double scan_normalization_constant(const VoxelPhantom& ph, const ScanGeometry& geom);

// drr_project_raw scaled by 1 / normalization and clamped to [0, 1].
ProjectionImage drr_project(const VoxelPhantom& ph, const CameraPose& pose,
                            const ScanGeometry& geom, double normalization);

}  // namespace ctsplat
