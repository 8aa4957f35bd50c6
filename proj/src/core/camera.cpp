#include "gsedit/camera.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "gsedit/error.hpp"

namespace gsedit {

namespace {

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

} // namespace

Camera::Camera(double azimuth_deg, double elevation_deg, double radius, double fov_y_deg,
               int width, int height)
    : azimuth_(azimuth_deg), elevation_(elevation_deg), radius_(radius), fov_y_(fov_y_deg),
      width_(width), height_(height)
{
    if (!(radius > 0.0) || !(fov_y_deg > 0.0 && fov_y_deg < 180.0) || width <= 0 || height <= 0) {
        throw ValidationError("camera: radius, fov and image size must be positive");
    }
    if (std::abs(elevation_deg) >= 90.0) {
        throw ValidationError("camera: elevation must lie strictly inside (-90, 90) degrees");
    }
    const double az = deg2rad(azimuth_deg);
    const double el = deg2rad(elevation_deg);
    // Azimuth 0 sits on the -z axis; positive elevation lifts the camera along +y.
    position_ = radius * Eigen::Vector3d(std::cos(el) * std::sin(az), std::sin(el),
                                         -std::cos(el) * std::cos(az));
    const Eigen::Vector3d forward = (-position_).normalized();
    const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitY()).normalized();
    const Eigen::Vector3d down = forward.cross(right);
    rotation_.row(0) = right.transpose();
    rotation_.row(1) = down.transpose();
    rotation_.row(2) = forward.transpose();
    translation_ = -rotation_ * position_;
    focal_ = 0.5 * height / std::tan(0.5 * deg2rad(fov_y_deg));
}

Eigen::Vector3d Camera::ray_direction(double u, double v) const
{
    const Eigen::Vector3d cam((u - cx()) / focal_, (v - cy()) / focal_, 1.0);
    return (rotation_.transpose() * cam).normalized();
}

CameraRig build_camera_rig(int n_per_ring, std::span<const double> elevations, double radius,
                           double fov_y, int width, int height)
{
    if (n_per_ring < 1) {
        throw ValidationError("camera rig: n_per_ring must be at least 1");
    }
    if (elevations.empty()) {
        throw ValidationError("camera rig: elevation list is empty");
    }
    CameraRig rig;
    rig.reserve(elevations.size() * n_per_ring);
    for (double el : elevations) {
        for (int k = 0; k < n_per_ring; ++k) {
            rig.emplace_back(k * 360.0 / n_per_ring, el, radius, fov_y, width, height);
        }
    }
    return rig;
}

CameraRig build_camera_rig(const RigSettings& s)
{
    return build_camera_rig(s.n_per_ring, s.elevations, s.radius, s.fov_y, s.width, s.height);
}

} // namespace gsedit
