#include "gsedit/color.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <string>
#include <utility>

namespace gsedit {

Eigen::Vector3d rgb_to_hsv(const Eigen::Vector3d& rgb)
{
    const double mx = rgb.maxCoeff();
    const double mn = rgb.minCoeff();
    const double d = mx - mn;
    double h = 0.0;
    if (d > 0.0) {
        if (mx == rgb.x()) {
            h = 60.0 * std::fmod((rgb.y() - rgb.z()) / d, 6.0);
        } else if (mx == rgb.y()) {
            h = 60.0 * ((rgb.z() - rgb.x()) / d + 2.0);
        } else {
            h = 60.0 * ((rgb.x() - rgb.y()) / d + 4.0);
        }
        if (h < 0.0) h += 360.0;
    }
    const double s = mx > 0.0 ? d / mx : 0.0;
    return {h, s, mx};
}

Eigen::Vector3d hsv_to_rgb(const Eigen::Vector3d& hsv)
{
    const double h = std::fmod(std::fmod(hsv.x(), 360.0) + 360.0, 360.0) / 60.0;
    const double s = hsv.y(), v = hsv.z();
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
    const double m = v - c;
    Eigen::Vector3d rgb;
    switch (static_cast<int>(h)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
    }
    return rgb.array() + m;
}

double hue_distance(double a, double b)
{
    const double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

std::optional<double> hue_from_text(std::string_view text)
{
    static const std::array<std::pair<const char*, double>, 9> kWords{{
        {"red", 0.0}, {"orange", 30.0}, {"yellow", 60.0}, {"green", 120.0}, {"cyan", 180.0},
        {"blue", 240.0}, {"purple", 270.0}, {"magenta", 300.0}, {"pink", 330.0},
    }};
    std::string word;
    auto match = [&]() -> std::optional<double> {
        for (const auto& [name, hue] : kWords) {
            if (word == name) return hue;
        }
        return std::nullopt;
    };
    for (std::size_t i = 0; i <= text.size(); ++i) {
        const char c = i < text.size() ? text[i] : ' ';
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!word.empty()) {
            if (auto h = match()) return h;
            word.clear();
        }
    }
    return std::nullopt;
}

} // namespace gsedit
