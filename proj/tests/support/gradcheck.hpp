#pragma once

// Central finite-difference oracle for render_backward.

#include <algorithm>
#include <array>
#include <cmath>

#include "fixtures.hpp"
#include "gsedit/params.hpp"

namespace gsedit::testing {

struct GroupError {
    double max_rel = 0.0;
    int checked = 0;
};

/// Indexed by ParamGroup.
using GradCheckReport = std::array<GroupError, 6>;

/// Relative error |a - n| / max(|a|, |n|, atol).
inline double relative_error(double analytic, double numeric, double atol = 1e-6)
{
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), atol});
}

/// True when another splat's depth lies between the two depths of splat i: the
/// compositing order flips inside the probe interval and the render jumps.
inline bool straddles_depth_order(const Scene& scene, const Camera& camera, std::size_t i, double za,
                                  double zb)
{
    const double lo = std::min(za, zb), hi = std::max(za, zb);
    for (std::size_t j = 0; j < scene.size(); ++j) {
        if (j == i) continue;
        const double z = camera.to_camera(scene.splats[j].position.cast<double>()).z();
        if (z >= lo && z <= hi) return true;
    }
    return false;
}

/// Checks every scalar parameter of every splat. The actual (float-rounded)
/// perturbation is used as the FD denominator. Probes that would cross a
/// depth-order swap are shrunk tenfold, up to three times.
inline GradCheckReport check_render_gradients(const Scene& scene, const Camera& camera,
                                              const ImageBuffer& upstream,
                                              const RasterSettings& settings, double h = 1e-4)
{
    const RenderGradients grads = render_backward(scene, camera, upstream, settings);
    GradCheckReport report{};
    Scene work = scene;
    const int n_params = param_count(scene.sh_degree);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        for (int k = 0; k < n_params; ++k) {
            float& p = param_ref(work.splats[i], k);
            const float original = p;
            auto depth_at = [&](double value) {
                p = static_cast<float>(value);
                const double z = camera.to_camera(work.splats[i].position.cast<double>()).z();
                p = original;
                return z;
            };
            double step = h;
            for (int shrink = 0; shrink < 3; ++shrink) {
                if (!straddles_depth_order(work, camera, i, depth_at(original - step), depth_at(original + step))) break;
                step /= 10.0;
            }
            p = static_cast<float>(original + step);
            const double plus_value = p;
            const double l_plus = weighted_render_sum(work, camera, upstream, settings);
            p = static_cast<float>(original - step);
            const double minus_value = p;
            const double l_minus = weighted_render_sum(work, camera, upstream, settings);
            p = original;
            const double numeric = (l_plus - l_minus) / (plus_value - minus_value);
            const double analytic = grad_value(grads.splats[i], k);
            auto& g = report[static_cast<int>(param_group(k))];
            g.max_rel = std::max(g.max_rel, relative_error(analytic, numeric));
            ++g.checked;
        }
    }
    return report;
}

} // namespace gsedit::testing
