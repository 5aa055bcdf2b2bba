// geometry.hpp: circular cone-beam acquisition geometry and pinhole projection.
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ctsplat {

// Parameters of one circular scan. World units are millimeters, the world
// origin is the isocenter, and the source orbits in the z = 0 plane so that
// +z is the rotation axis (patient superior).
struct ScanGeometry {
    double source_to_isocenter = 1000.0;  // mm
    double source_to_detector = 1500.0;   // mm, must exceed source_to_isocenter
    double detector_width = 300.0;        // mm
    double detector_height = 300.0;       // mm
    int image_width = 128;                // px
    int image_height = 128;               // px
    int n_views = 360;
    double angular_start_deg = 0.0;
    double angular_step_deg = 1.0;
    double fov_side = 200.0;  // edge length of the cubic reconstruction volume, mm

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

// Pinhole camera for a single view. `rotation` maps world to camera
// coordinates and `camera_center` is the source position in world space.
// The camera looks along +z_cam, so depth is positive in front of the
// source; +x_cam follows increasing image u. With the orbit convention
// below, world +z maps to -y_cam, i.e. image row 0 is the superior edge.
struct CameraPose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d camera_center = Eigen::Vector3d::Zero();
    double fx = 0.0, fy = 0.0;  // focal lengths, px
    double cx = 0.0, cy = 0.0;  // principal point, px
    double view_angle_deg = 0.0;
    double near_plane = 0.0;  // minimum projectable depth, mm
};

// Result of projecting one world point. `ok` is false when the point lies
// at or behind the near plane; u, v, depth are undefined in that case.
struct PointProjection {
    double u = 0.0, v = 0.0;  // continuous pixel coordinates
    double depth = 0.0;       // camera-space z, mm
    bool ok = false;
};

// Pose of the source at `angle_deg` on the orbit: camera center at
// (R cos, R sin, 0) looking at the origin with up = +z.
CameraPose pose_for_angle(const ScanGeometry& geom, double angle_deg);

// All n_views poses at angular_start_deg + i * angular_step_deg.
std::vector<CameraPose> orbit_poses(const ScanGeometry& geom);

// Perspective projection of a world point. Pixel (ix, iy) samples the
// continuous image point (ix, iy), so u = cx lands exactly on pixel cx
// when cx is integral.
PointProjection project_point(const CameraPose& pose, const Eigen::Vector3d& x_world);

// Jacobian of (u, v) with respect to the camera-space point. Throws
// std::invalid_argument if x_cam.z() is not beyond the near plane.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraPose& pose,
                                                const Eigen::Vector3d& x_cam);

}  // namespace ctsplat
