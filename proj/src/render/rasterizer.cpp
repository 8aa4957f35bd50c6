#include <algorithm>
#include <cmath>

#include "gsedit/error.hpp"
#include "gsedit/parallel.hpp"
#include "gsedit/renderer.hpp"

namespace gsedit {

TileBinning bin_splats(const std::vector<std::optional<ProjectedSplat>>& projected, int width,
                       int height)
{
    TileBinning bins;
    bins.tiles_x = (width + kTileSize - 1) / kTileSize;
    bins.tiles_y = (height + kTileSize - 1) / kTileSize;
    bins.lists.assign(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y, {});

    // Global (depth, index) order, then a stable scatter keeps each tile sorted.
    std::vector<std::uint32_t> order;
    order.reserve(projected.size());
    for (std::uint32_t i = 0; i < projected.size(); ++i) {
        if (projected[i]) {
            order.push_back(i);
        }
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double da = projected[a]->depth;
        const double db = projected[b]->depth;
        return da < db || (da == db && a < b);
    });
    for (std::uint32_t i : order) {
        const auto& box = projected[i]->bbox;
        for (int ty = box[1] / kTileSize; ty <= box[3] / kTileSize; ++ty) {
            for (int tx = box[0] / kTileSize; tx <= box[2] / kTileSize; ++tx) {
                bins.lists[ty * bins.tiles_x + tx].push_back(i);
            }
        }
    }
    return bins;
}

ForwardPass rasterize(const Scene& scene, const Camera& camera, const RasterSettings& settings)
{
    const int width = camera.width();
    const int height = camera.height();
    ForwardPass fwd;
    fwd.image = ImageBuffer(width, height, 4);
    fwd.depth = ImageBuffer(width, height, 1);
    fwd.final_transmittance.assign(static_cast<std::size_t>(width) * height, 1.0);
    fwd.contributor_count.assign(static_cast<std::size_t>(width) * height, 0);

    fwd.projected.resize(scene.size());
    parallel_for(static_cast<int>(scene.size()), [&](int i) {
        fwd.projected[i] = project_splat(scene.splats[i], scene.sh_degree, camera, settings);
    });
    fwd.binning = bin_splats(fwd.projected, width, height);

    const Eigen::Vector3d background = scene.background.cast<double>();
    const int n_tiles = fwd.binning.tiles_x * fwd.binning.tiles_y;
    const double max_alpha = settings.max_alpha;
    const double min_alpha = settings.min_alpha;
    const double floor_t = settings.transmittance_floor;
    parallel_for(n_tiles, [&](int tile) {
        const int tx = tile % fwd.binning.tiles_x;
        const int ty = tile / fwd.binning.tiles_x;
        const auto& list = fwd.binning.lists[tile];

        // Compact copy of the tile's splats in compositing order.
        struct Packed {
            double mx, my, ca, cb, cc, opacity, r, g, b, depth, min_power;
            int x0, y0, x1, y1;
        };
        std::vector<Packed> packed(list.size());
        for (std::size_t j = 0; j < list.size(); ++j) {
            const ProjectedSplat& p = *fwd.projected[list[j]];
            packed[j] = {p.mean.x(), p.mean.y(), p.conic[0], p.conic[1], p.conic[2], p.opacity, p.rgb[0],
                         p.rgb[1], p.rgb[2], p.depth, p.min_power, p.bbox[0], p.bbox[1], p.bbox[2], p.bbox[3]};
        }
        const auto n_list = static_cast<std::uint32_t>(packed.size());

        for (int py = ty * kTileSize; py < std::min(height, (ty + 1) * kTileSize); ++py) {
            for (int px = tx * kTileSize; px < std::min(width, (tx + 1) * kTileSize); ++px) {
                const double u = px + 0.5;
                const double v = py + 0.5;
                double transmittance = 1.0;
                double r = 0.0, g = 0.0, b = 0.0;
                double depth = 0.0;
                std::uint32_t used = 0;
                for (std::uint32_t j = 0; j < n_list; ++j) {
                    const Packed& p = packed[j];
                    // Outside the box alpha * G is below the cutoff.
                    if (px < p.x0 || px > p.x1 || py < p.y0 || py > p.y1) {
                        continue;
                    }
                    const double dx = u - p.mx;
                    const double dy = v - p.my;
                    const double power = -0.5 * (p.ca * dx * dx + p.cc * dy * dy) - p.cb * dx * dy;
                    if (power > 0.0 || power < p.min_power) {
                        continue;
                    }
                    const double alpha = std::min(max_alpha, p.opacity * std::exp(power));
                    if (alpha < min_alpha) {
                        continue;
                    }
                    const double next = transmittance * (1.0 - alpha);
                    if (next < floor_t) {
                        break;
                    }
                    const double w = alpha * transmittance;
                    r += w * p.r;
                    g += w * p.g;
                    b += w * p.b;
                    depth += w * p.depth;
                    transmittance = next;
                    used = j + 1;
                }
                const std::size_t pix = static_cast<std::size_t>(py) * width + px;
                fwd.final_transmittance[pix] = transmittance;
                fwd.contributor_count[pix] = used;
                fwd.image.at(px, py, 0) = r + transmittance * background[0];
                fwd.image.at(px, py, 1) = g + transmittance * background[1];
                fwd.image.at(px, py, 2) = b + transmittance * background[2];
                fwd.image.at(px, py, 3) = 1.0 - transmittance;
                const double coverage = 1.0 - transmittance;
                fwd.depth.at(px, py, 0) = coverage > 1e-6 ? depth / coverage : 0.0;
            }
        }
    });
    return fwd;
}

ImageBuffer render(const Scene& scene, const Camera& camera, const RasterSettings& settings)
{
    return rasterize(scene, camera, settings).image;
}

void RenderGradients::require_finite() const
{
    for (const auto& g : splats) {
        bool ok = g.position.allFinite() && g.rotation.allFinite() && g.log_scale.allFinite() &&
                  std::isfinite(g.opacity_logit);
        for (const auto& c : g.sh) {
            ok = ok && c.allFinite();
        }
        if (!ok) {
            throw ValidationError("render gradients contain non-finite values");
        }
    }
}

void RenderGradients::add_scaled(const RenderGradients& other, double scale)
{
    if (other.size() != size()) {
        throw ValidationError("RenderGradients::add_scaled: size mismatch");
    }
    for (std::size_t i = 0; i < splats.size(); ++i) {
        auto& a = splats[i];
        const auto& b = other.splats[i];
        a.position += scale * b.position;
        a.rotation += scale * b.rotation;
        a.log_scale += scale * b.log_scale;
        a.opacity_logit += scale * b.opacity_logit;
        for (int k = 0; k < kMaxShCoeffs; ++k) {
            a.sh[k] += scale * b.sh[k];
        }
        mean2d_norm[i] += std::abs(scale) * other.mean2d_norm[i];
        visible[i] = visible[i] | other.visible[i];
    }
}

} // namespace gsedit
