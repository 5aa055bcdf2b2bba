#include "ctsplat/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ctsplat {

namespace {

void require_positive(double value, const char* field) {
    if (!(value > 0.0)) {
        throw std::invalid_argument(std::string("ScanGeometry: ") + field +
                                    " must be positive, got " + std::to_string(value));
    }
}

}  // namespace

void ScanGeometry::validate() const {
    require_positive(source_to_isocenter, "source_to_isocenter");
    require_positive(source_to_detector, "source_to_detector");
    require_positive(detector_width, "detector_width");
    require_positive(detector_height, "detector_height");
    require_positive(fov_side, "fov_side");
    if (source_to_detector <= source_to_isocenter) {
        throw std::invalid_argument(
            "ScanGeometry: source_to_detector must exceed source_to_isocenter");
    }
    if (image_width < 1 || image_height < 1) {
        throw std::invalid_argument("ScanGeometry: image dimensions must be at least 1 px");
    }
    if (n_views < 1) {
        throw std::invalid_argument("ScanGeometry: n_views must be at least 1");
    }
    if (fov_side >= 2.0 * source_to_isocenter) {
        throw std::invalid_argument("ScanGeometry: fov_side must fit inside the source orbit");
    }
}

CameraPose pose_for_angle(const ScanGeometry& geom, double angle_deg) {
    geom.validate();
    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double radius = geom.source_to_isocenter;

    CameraPose pose;
    pose.camera_center = Eigen::Vector3d(radius * std::cos(theta), radius * std::sin(theta), 0.0);

    // Right-handed look-at frame: forward through the isocenter, up = +z.
    const Eigen::Vector3d forward = (-pose.camera_center).normalized();
    const Eigen::Vector3d up(0.0, 0.0, 1.0);
    const Eigen::Vector3d x_cam = forward.cross(up).normalized();
    const Eigen::Vector3d y_cam = forward.cross(x_cam);
    pose.rotation.row(0) = x_cam;
    pose.rotation.row(1) = y_cam;
    pose.rotation.row(2) = forward;

    pose.fx = geom.source_to_detector * geom.image_width / geom.detector_width;
    pose.fy = geom.source_to_detector * geom.image_height / geom.detector_height;
    pose.cx = geom.image_width / 2.0;
    pose.cy = geom.image_height / 2.0;
    pose.view_angle_deg = angle_deg;
    pose.near_plane = 1e-4 * radius;
    return pose;
}

std::vector<CameraPose> orbit_poses(const ScanGeometry& geom) {
    geom.validate();
    std::vector<CameraPose> poses;
    poses.reserve(geom.n_views);
    for (int i = 0; i < geom.n_views; ++i) {
        poses.push_back(pose_for_angle(geom, geom.angular_start_deg + i * geom.angular_step_deg));
    }
    return poses;
}

PointProjection project_point(const CameraPose& pose, const Eigen::Vector3d& x_world) {
    const Eigen::Vector3d x_cam = pose.rotation * (x_world - pose.camera_center);
    PointProjection p;
    p.depth = x_cam.z();
    if (!(p.depth > pose.near_plane)) {
        p.ok = false;
        return p;
    }
    p.u = pose.fx * x_cam.x() / x_cam.z() + pose.cx;
    p.v = pose.fy * x_cam.y() / x_cam.z() + pose.cy;
    p.ok = true;
    return p;
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraPose& pose,
                                                const Eigen::Vector3d& x_cam) {
    const double z = x_cam.z();
    if (!(z > pose.near_plane)) {
        throw std::invalid_argument("projection_jacobian: point depth " + std::to_string(z) +
                                    " is not beyond the near plane");
    }
    Eigen::Matrix<double, 2, 3> jac;
    jac << pose.fx / z, 0.0, -pose.fx * x_cam.x() / (z * z),
           0.0, pose.fy / z, -pose.fy * x_cam.y() / (z * z);
    return jac;
}

}  // namespace ctsplat
