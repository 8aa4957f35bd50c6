#include <algorithm>
#include <cmath>

#include "gsedit/error.hpp"
#include "gsedit/parallel.hpp"
#include "gsedit/renderer.hpp"
#include "projection.hpp"

namespace gsedit {

RenderGradients backward(const ForwardPass& fwd, const Scene& scene, const Camera& camera,
                         const ImageBuffer& upstream, const RasterSettings& settings)
{
    const int width = camera.width();
    const int height = camera.height();
    if (upstream.width() != width || upstream.height() != height || upstream.channels() < 3) {
        throw ValidationError("render_backward: upstream gradient does not match the render size");
    }
    upstream.require_finite("render_backward upstream gradient");

    const Eigen::Vector3d background = scene.background.cast<double>();
    const TileBinning& bins = fwd.binning;
    const int n_tiles = bins.tiles_x * bins.tiles_y;

    // Per-tile partial gradients, indexed like the tile lists. Each tile is
    // processed by one worker in a fixed pixel order.
    std::vector<std::vector<detail::ProjectedGradient>> partial(n_tiles);
    parallel_for(n_tiles, [&](int tile) {
        const auto& list = bins.lists[tile];
        auto& acc = partial[tile];
        acc.assign(list.size(), detail::ProjectedGradient{});
        const int tx = tile % bins.tiles_x;
        const int ty = tile / bins.tiles_x;
        for (int py = ty * kTileSize; py < std::min(height, (ty + 1) * kTileSize); ++py) {
            for (int px = tx * kTileSize; px < std::min(width, (tx + 1) * kTileSize); ++px) {
                const std::size_t pix = static_cast<std::size_t>(py) * width + px;
                const Eigen::Vector3d d_pixel(upstream.at(px, py, 0), upstream.at(px, py, 1),
                                              upstream.at(px, py, 2));
                if (d_pixel.isZero(0.0)) {
                    continue;
                }
                const double u = px + 0.5;
                const double v = py + 0.5;
                const double t_final = fwd.final_transmittance[pix];
                const double d_background = background.dot(d_pixel);
                double transmittance = t_final;
                Eigen::Vector3d accum = Eigen::Vector3d::Zero();
                Eigen::Vector3d last_color = Eigen::Vector3d::Zero();
                double last_alpha = 0.0;
                for (std::uint32_t j = fwd.contributor_count[pix]; j-- > 0;) {
                    const ProjectedSplat& p = *fwd.projected[list[j]];
                    // Outside the box alpha * G is below the cutoff.
                    if (px < p.bbox[0] || px > p.bbox[2] || py < p.bbox[1] || py > p.bbox[3]) {
                        continue;
                    }
                    const double dx = u - p.mean.x();
                    const double dy = v - p.mean.y();
                    const double power =
                        -0.5 * (p.conic[0] * dx * dx + p.conic[2] * dy * dy) - p.conic[1] * dx * dy;
                    if (power > 0.0 || power < p.min_power) {
                        continue;
                    }
                    const double gauss = std::exp(power);
                    const double raw_alpha = p.opacity * gauss;
                    const double alpha = std::min(settings.max_alpha, raw_alpha);
                    if (alpha < settings.min_alpha) {
                        continue;
                    }
                    transmittance /= (1.0 - alpha);
                    auto& g = acc[j];
                    g.rgb += (alpha * transmittance) * d_pixel;

                    accum = last_alpha * last_color + (1.0 - last_alpha) * accum;
                    last_color = p.rgb;
                    double d_alpha = transmittance * (p.rgb - accum).dot(d_pixel);
                    d_alpha += -t_final / (1.0 - alpha) * d_background;
                    last_alpha = alpha;
                    if (raw_alpha > settings.max_alpha) {
                        continue;
                    }
                    g.opacity += gauss * d_alpha;
                    const double d_power = raw_alpha * d_alpha;
                    g.mean.x() += d_power * (p.conic[0] * dx + p.conic[1] * dy);
                    g.mean.y() += d_power * (p.conic[1] * dx + p.conic[2] * dy);
                    g.conic[0] += -0.5 * dx * dx * d_power;
                    g.conic[1] += -dx * dy * d_power;
                    g.conic[2] += -0.5 * dy * dy * d_power;
                }
            }
        }
    });

    // Reduce tile partials in tile order so the sums do not depend on threading.
    const std::size_t n = scene.size();
    std::vector<detail::ProjectedGradient> reduced(n);
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& list = bins.lists[tile];
        for (std::size_t j = 0; j < list.size(); ++j) {
            auto& r = reduced[list[j]];
            const auto& g = partial[tile][j];
            r.mean += g.mean;
            r.conic += g.conic;
            r.opacity += g.opacity;
            r.rgb += g.rgb;
        }
    }

    RenderGradients grads(n);
    parallel_for(static_cast<int>(n), [&](int i) {
        if (!fwd.projected[i]) {
            return;
        }
        grads.visible[i] = 1;
        detail::project_splat_backward(scene.splats[i], scene.sh_degree, camera, settings,
                                       *fwd.projected[i], reduced[i], grads.splats[i]);
        grads.mean2d_norm[i] = std::hypot(reduced[i].mean.x() * 0.5 * width,
                                          reduced[i].mean.y() * 0.5 * height);
    });
    return grads;
}

RenderGradients render_backward(const Scene& scene, const Camera& camera,
                                const ImageBuffer& upstream, const RasterSettings& settings)
{
    return backward(rasterize(scene, camera, settings), scene, camera, upstream, settings);
}

} // namespace gsedit
