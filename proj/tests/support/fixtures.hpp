#pragma once

// Test-only fixtures and independent oracles.

#include <random>
#include <vector>

#include "gsedit/camera.hpp"
#include "gsedit/image.hpp"
#include "gsedit/renderer.hpp"
#include "gsedit/scene.hpp"

namespace gsedit::testing {

/// Random scene inside [-extent, extent]^3 with moderate scales and opacities in [0.2, 0.9].
Scene random_scene(std::mt19937_64& rng, int n, int sh_degree = 0, double extent = 0.6,
                   double min_log_scale = -3.0, double max_log_scale = -1.6);

/// Per-pixel, per-splat compositing without tiling or extent culling, with its own
/// EWA projection. Same cutoffs as the tiled renderer.
ImageBuffer brute_force_render(const Scene& scene, const Camera& camera,
                               const RasterSettings& settings = {});

struct AnalyticSphere {
    Eigen::Vector3d center;
    double radius;
    Eigen::Vector3d color;
};

/// Ray-traced flat-colored spheres on a white background, `samples`^2 supersampling.
/// Alpha channel holds coverage.
ImageBuffer render_spheres(const std::vector<AnalyticSphere>& spheres, const Camera& camera,
                           int samples = 4);

/// Three colored spheres used by the reconstruction tests.
std::vector<AnalyticSphere> three_spheres();

/// Splats filling a ball of `radius` around the origin; color per splat from `color_of(position)`.
template <typename ColorFn>
Scene ball_scene(std::mt19937_64& rng, int n, double radius, ColorFn color_of,
                 double opacity = 0.9, double scale = 0.06)
{
    Scene scene;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    while (static_cast<int>(scene.splats.size()) < n) {
        Eigen::Vector3d p(u(rng), u(rng), u(rng));
        if (p.norm() > 1.0) {
            continue;
        }
        p *= radius;
        GaussianSplat s;
        s.position = p.cast<float>();
        s.log_scale = Eigen::Vector3f::Constant(static_cast<float>(std::log(scale)));
        s.opacity_logit = static_cast<float>(logit(opacity));
        s.sh[0] = rgb_to_sh_dc(color_of(p).template cast<float>());
        scene.splats.push_back(s);
    }
    return scene;
}

Scene gray_sphere_scene(std::mt19937_64& rng, int n = 1500, double radius = 0.6);

/// Red on the +y hemisphere, blue on the -y hemisphere.
Scene hemisphere_scene(std::mt19937_64& rng, int n = 1500, double radius = 0.6);

/// Sum of upstream * rgb of a smooth render.
double weighted_render_sum(const Scene& scene, const Camera& camera, const ImageBuffer& upstream,
                           const RasterSettings& settings);

/// IoU of the alpha > 0.5 silhouettes of two RGBA images.
double silhouette_iou(const ImageBuffer& a, const ImageBuffer& b);

/// Saturation-weighted circular mean hue (degrees) over alpha > 0.5 pixels.
double mean_foreground_hue(const ImageBuffer& rgba);

/// Mean luminance over alpha > 0.5 pixels whose row lies in [y0, y1).
double mean_foreground_luminance(const ImageBuffer& rgba, int y0, int y1);

ImageBuffer random_image(std::mt19937_64& rng, int width, int height, int channels, double lo,
                         double hi);

} // namespace gsedit::testing
