#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Core>

namespace gsedit {

/// HSV with hue in degrees [0, 360), saturation and value in [0, 1].
Eigen::Vector3d rgb_to_hsv(const Eigen::Vector3d& rgb);
Eigen::Vector3d hsv_to_rgb(const Eigen::Vector3d& hsv);

/// Rec. 709 luma weights.
inline double luminance(const Eigen::Vector3d& rgb)
{
    return 0.2126 * rgb.x() + 0.7152 * rgb.y() + 0.0722 * rgb.z();
}

/// Smallest absolute difference between two hues, in degrees [0, 180].
double hue_distance(double a_deg, double b_deg);

/// Hue in degrees of the first color word in `text` (red, orange, yellow, green,
/// cyan, blue, purple, magenta, pink), or nothing if no color word appears.
std::optional<double> hue_from_text(std::string_view text);

} // namespace gsedit
