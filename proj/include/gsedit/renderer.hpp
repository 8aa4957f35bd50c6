#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gsedit/camera.hpp"
#include "gsedit/image.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

inline constexpr int kTileSize = 16;

struct RasterSettings {
    /// Per-pixel contributions with alpha' below this are skipped.
    double min_alpha = 1.0 / 255.0;
    double max_alpha = 0.99;
    /// Compositing stops before a splat would drive transmittance below this.
    double transmittance_floor = 1e-4;
    double near_plane = 0.2;
    /// Isotropic dilation (px^2) added to every projected covariance.
    double lowpass = 0.3;
    ActivationLimits limits;

    /// Settings under which the forward map is smooth in every parameter up to
    /// contributions below 1e-12 (no early termination). Used by gradient checks.
    static RasterSettings smooth();
};

/// A splat after EWA projection into one camera.
struct ProjectedSplat {
    Eigen::Vector2d mean;        // pixel coordinates
    Eigen::Matrix2d cov;         // includes the low-pass dilation
    Eigen::Vector3d conic;       // inverse covariance (a, b, c): [[a, b], [b, c]]
    double depth = 0.0;          // camera-space z
    double opacity = 0.0;        // activated alpha
    Eigen::Vector3d rgb;         // clamped SH color
    Eigen::Vector3d rgb_raw;     // unclamped SH color (for the clamp mask)
    double extent_px = 0.0;      // bounding radius used for tile binning
    /// Exponents below this put alpha * G under min_alpha (with a small margin).
    double min_power = -std::numeric_limits<double>::infinity();
    std::array<int, 4> bbox{};   // inclusive pixel bounds: x0, y0, x1, y1
};

/// EWA projection; std::nullopt when the splat is culled (behind the near plane,
/// degenerate, too transparent to ever reach the cutoff, or outside the viewport).
std::optional<ProjectedSplat> project_splat(const GaussianSplat& splat, int sh_degree,
                                            const Camera& camera,
                                            const RasterSettings& settings = {});

/// Per-tile lists of splat indices sorted by (depth, index).
struct TileBinning {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> lists;

    const std::vector<std::uint32_t>& tile(int tx, int ty) const { return lists[ty * tiles_x + tx]; }
};

TileBinning bin_splats(const std::vector<std::optional<ProjectedSplat>>& projected, int width,
                       int height);

/// Everything the backward pass needs from a forward render.
struct ForwardPass {
    ImageBuffer image;   // RGBA; alpha = 1 - final transmittance
    ImageBuffer depth;   // 1 channel, alpha-weighted mean depth (0 where empty)
    std::vector<std::optional<ProjectedSplat>> projected;
    TileBinning binning;
    std::vector<double> final_transmittance;      // per pixel
    std::vector<std::uint32_t> contributor_count; // per pixel: tile-list prefix length used
};

ForwardPass rasterize(const Scene& scene, const Camera& camera,
                      const RasterSettings& settings = {});

/// Front-to-back alpha-composited RGBA render.
ImageBuffer render(const Scene& scene, const Camera& camera, const RasterSettings& settings = {});

struct SplatGradient {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector4d rotation = Eigen::Vector4d::Zero();
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
    double opacity_logit = 0.0;
    std::array<Eigen::Vector3d, kMaxShCoeffs> sh{};

    SplatGradient() { sh.fill(Eigen::Vector3d::Zero()); }
};

/// Per-splat parameter gradients aligned with Scene::splats.
struct RenderGradients {
    std::vector<SplatGradient> splats;
    /// |dL/d(mean2d)| in normalized device units, per splat; used for densification.
    std::vector<double> mean2d_norm;
    /// 1 if the splat was projected into the view.
    std::vector<std::uint8_t> visible;

    explicit RenderGradients(std::size_t n = 0) : splats(n), mean2d_norm(n, 0.0), visible(n, 0) {}
    std::size_t size() const { return splats.size(); }
    void require_finite() const;
    /// this += scale * other
    void add_scaled(const RenderGradients& other, double scale);
};

/// Gradients of L = sum(upstream * rgb) w.r.t. every splat parameter, reusing a forward pass.
/// `upstream` must be W x H with at least 3 channels; only RGB is used.
RenderGradients backward(const ForwardPass& forward, const Scene& scene, const Camera& camera,
                         const ImageBuffer& upstream, const RasterSettings& settings = {});

RenderGradients render_backward(const Scene& scene, const Camera& camera,
                                const ImageBuffer& upstream, const RasterSettings& settings = {});

} // namespace gsedit
