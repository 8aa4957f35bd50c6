#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "gsedit/error.hpp"
#include "gsedit/mesh.hpp"
#include "gsedit/parallel.hpp"

namespace gsedit {

DensityGrid::DensityGrid(const Scene& scene, const GridSettings& settings) : settings_(settings)
{
    if (scene.empty()) throw ValidationError("density grid needs a nonempty scene");
    if (settings.blocks < 1 || settings.block_samples < 2 || !(settings.bound_scale > 0.0)) {
        throw ValidationError("invalid density grid settings");
    }

    Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300);
    Eigen::Vector3d hi = Eigen::Vector3d::Constant(-1e300);
    kernels_.reserve(scene.size());
    for (const GaussianSplat& s : scene.splats) {
        const Activated a = activate(s, settings.limits);
        const Eigen::Vector3d c = s.position.cast<double>();
        const double r = 3.0 * a.scale.maxCoeff();
        lo = lo.cwiseMin(c - Eigen::Vector3d::Constant(r));
        hi = hi.cwiseMax(c + Eigen::Vector3d::Constant(r));
        margin_ = std::max(margin_, r);
        kernels_.push_back({c, splat_covariance(s, settings.limits).inverse(), a.opacity});
    }
    const double half = 0.5 * settings.bound_scale * (hi - lo).maxCoeff();
    origin_ = 0.5 * (lo + hi) - Eigen::Vector3d::Constant(half);
    spacing_ = 2.0 * half / resolution();

    const int nb = settings.blocks;
    const double width = block_width();
    block_splats_.assign(static_cast<std::size_t>(nb) * nb * nb, {});
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
        std::array<int, 3> b0{}, b1{};
        for (int axis = 0; axis < 3; ++axis) {
            const double rel = kernels_[i].center[axis] - origin_[axis];
            b0[axis] = std::clamp(static_cast<int>(std::floor((rel - margin_) / width)), 0, nb - 1);
            b1[axis] = std::clamp(static_cast<int>(std::floor((rel + margin_) / width)), 0, nb - 1);
        }
        for (int bz = b0[2]; bz <= b1[2]; ++bz) {
            for (int by = b0[1]; by <= b1[1]; ++by) {
                for (int bx = b0[0]; bx <= b1[0]; ++bx) {
                    block_splats_[(static_cast<std::size_t>(bz) * nb + by) * nb + bx].push_back(
                        static_cast<std::uint32_t>(i));
                }
            }
        }
    }
}

std::array<int, 3> DensityGrid::block_of(const Eigen::Vector3d& x) const
{
    std::array<int, 3> b{};
    for (int axis = 0; axis < 3; ++axis) {
        b[axis] = std::clamp(static_cast<int>(std::floor((x[axis] - origin_[axis]) / block_width())), 0,
                             settings_.blocks - 1);
    }
    return b;
}

double DensityGrid::query(const Eigen::Vector3d& x, const std::array<int, 3>& block) const
{
    double d = 0.0;
    for (std::uint32_t i : block_splats(block[0], block[1], block[2])) {
        const Kernel& k = kernels_[i];
        const Eigen::Vector3d r = x - k.center;
        d += k.opacity * std::exp(-0.5 * r.dot(k.inv_cov * r));
    }
    return d;
}

void DensityGrid::sample()
{
    const int nb = settings_.blocks;
    const int ns = settings_.block_samples;
    const int n = resolution();
    values_.assign(static_cast<std::size_t>(n) * n * n, 0.0);
    parallel_for(nb * nb * nb, [&](int b) {
        const std::array<int, 3> block{b % nb, (b / nb) % nb, b / (nb * nb)};
        if (block_splats(block[0], block[1], block[2]).empty()) return;
        for (int k = block[2] * ns; k < (block[2] + 1) * ns; ++k) {
            for (int j = block[1] * ns; j < (block[1] + 1) * ns; ++j) {
                for (int i = block[0] * ns; i < (block[0] + 1) * ns; ++i) {
                    values_[(static_cast<std::size_t>(k) * n + j) * n + i] = query(point(i, j, k), block);
                }
            }
        }
    });
}

double global_density(const Scene& scene, const Eigen::Vector3d& x, const ActivationLimits& limits)
{
    double d = 0.0;
    for (const GaussianSplat& s : scene.splats) {
        d += activate(s, limits).opacity * eval_gaussian(s, x, limits);
    }
    return d;
}

double query_density(const DensityGrid& grid, const Eigen::Vector3d& x, const std::array<int, 3>& block)
{
    return grid.query(x, block);
}

} // namespace gsedit
