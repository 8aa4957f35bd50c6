#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace gsedit {

/// Pinhole camera on a sphere around the origin, always looking at the origin.
/// Camera space follows the x-right, y-down, z-forward convention; world space is Y-up.
/// Pixel (x, y) has its center at (x + 0.5, y + 0.5).
class Camera {
public:
    Camera() = default;
    Camera(double azimuth_deg, double elevation_deg, double radius, double fov_y_deg, int width,
           int height);

    double azimuth() const { return azimuth_; }
    double elevation() const { return elevation_; }
    double radius() const { return radius_; }
    double fov_y() const { return fov_y_; }
    int width() const { return width_; }
    int height() const { return height_; }

    double focal() const { return focal_; }
    double cx() const { return 0.5 * width_; }
    double cy() const { return 0.5 * height_; }

    const Eigen::Matrix3d& rotation() const { return rotation_; }
    const Eigen::Vector3d& translation() const { return translation_; }
    const Eigen::Vector3d& position() const { return position_; }
    Eigen::Vector3d forward() const { return rotation_.row(2).transpose(); }

    Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const
    {
        return rotation_ * world + translation_;
    }
    Eigen::Vector2d project(const Eigen::Vector3d& cam) const
    {
        return {focal_ * cam.x() / cam.z() + cx(), focal_ * cam.y() / cam.z() + cy()};
    }
    /// World-space unit ray direction through pixel position (u, v).
    Eigen::Vector3d ray_direction(double u, double v) const;

private:
    double azimuth_ = 0.0;
    double elevation_ = 0.0;
    double radius_ = 2.5;
    double fov_y_ = 49.0;
    int width_ = 128;
    int height_ = 128;
    double focal_ = 0.0;
    Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
    Eigen::Vector3d position_ = Eigen::Vector3d::Zero();
};

using CameraRig = std::vector<Camera>;

struct RigSettings {
    int n_per_ring = 10;
    std::vector<double> elevations{0.0, 30.0};
    double radius = 2.5;
    double fov_y = 49.0;
    int width = 128;
    int height = 128;
};

/// |elevations| * n_per_ring cameras ordered by (elevation, azimuth); azimuth of
/// camera k in a ring is k * 360 / n_per_ring.
CameraRig build_camera_rig(int n_per_ring, std::span<const double> elevations, double radius,
                           double fov_y, int width, int height);
CameraRig build_camera_rig(const RigSettings& settings);

} // namespace gsedit
