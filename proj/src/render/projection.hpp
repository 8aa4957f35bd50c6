#pragma once

// Internal: backward pass of the per-splat projection.

#include "gsedit/renderer.hpp"

namespace gsedit::detail {

/// Gradients w.r.t. the outputs of project_splat.
struct ProjectedGradient {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Vector3d conic = Eigen::Vector3d::Zero();
    double opacity = 0.0;
    Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
};

/// Chains projected-space gradients back to the stored splat parameters.
void project_splat_backward(const GaussianSplat& splat, int sh_degree, const Camera& camera,
                            const RasterSettings& settings, const ProjectedSplat& projected,
                            const ProjectedGradient& grad, SplatGradient& out);

} // namespace gsedit::detail
