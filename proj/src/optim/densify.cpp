#include <cmath>

#include "gsedit/error.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit {

DensifyReport densify_and_prune(Scene& scene, OptimState& state, const DensifyConfig& config,
                                std::mt19937_64& rng)
{
    if (!(config.split_scale_factor > 0.0) || config.split_children < 1) {
        throw ValidationError("densify: split factor and child count must be positive");
    }
    state.require_size(scene.size());
    const std::size_t n = scene.size();
    const double size_limit = config.percent_dense * config.scene_extent;
    const float log_shrink = static_cast<float>(std::log(config.split_scale_factor));

    DensifyReport report;
    std::vector<GaussianSplat> out;
    std::vector<std::size_t> source;
    out.reserve(n);
    source.reserve(n);
    std::vector<GaussianSplat> added;
    std::vector<std::size_t> added_source;
    std::normal_distribution<double> normal(0.0, 1.0);

    for (std::size_t i = 0; i < n; ++i) {
        const GaussianSplat& s = scene.splats[i];
        const double mean_grad =
            state.grad_count[i] > 0 ? state.grad_accum[i] / state.grad_count[i] : 0.0;
        const bool hot = mean_grad >= config.grad_threshold;
        const double max_scale = std::exp(static_cast<double>(s.log_scale.maxCoeff()));
        if (hot && max_scale <= size_limit) {
            out.push_back(s);
            source.push_back(i);
            added.push_back(s);
            added_source.push_back(i);
            ++report.cloned;
        } else if (hot) {
            // Children are drawn from the parent's own Gaussian.
            const Activated act = activate(s);
            const Eigen::Matrix3d r = rotation_matrix(s.rotation.cast<double>());
            for (int c = 0; c < config.split_children; ++c) {
                const Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
                const Eigen::Vector3d offset = r * act.scale.cwiseProduct(z);
                GaussianSplat child = s;
                child.position = (s.position.cast<double>() + offset).cast<float>();
                child.log_scale = s.log_scale.array() - log_shrink;
                added.push_back(child);
                added_source.push_back(i);
            }
            ++report.split;
        } else {
            out.push_back(s);
            source.push_back(i);
        }
    }
    // New splats start with zero Adam moments. Copying the parent's moments keeps a
    // clone moving in lockstep with its parent, so the pair never separates.
    const std::size_t n_old = out.size();
    out.insert(out.end(), added.begin(), added.end());
    source.insert(source.end(), added_source.begin(), added_source.end());

    std::vector<GaussianSplat> kept;
    std::vector<std::size_t> kept_source;
    std::vector<bool> kept_fresh;
    kept.reserve(out.size());
    kept_source.reserve(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (sigmoid(out[i].opacity_logit) < config.prune_opacity) {
            ++report.pruned;
            continue;
        }
        kept.push_back(out[i]);
        kept_source.push_back(source[i]);
        kept_fresh.push_back(i >= n_old);
    }
    scene.splats = std::move(kept);
    state.gather(kept_source, kept_fresh);
    state.reset_stats();
    return report;
}

} // namespace gsedit
