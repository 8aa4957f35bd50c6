#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gsedit/camera.hpp"
#include "gsedit/image.hpp"
#include "gsedit/params.hpp"
#include "gsedit/renderer.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

// ---- losses ---------------------------------------------------------------

struct SsimSettings {
    int window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// Mean SSIM over the first three channels, Gaussian window, zero padding.
double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimSettings& settings = {});

struct LossResult {
    double value = 0.0;
    double l1 = 0.0;
    double ssim = 1.0;
    ImageBuffer grad;  // W x H x 3, dL/d(render rgb)
};

/// (1 - lambda) * L1 + lambda * (1 - SSIM) / 2 over RGB.
LossResult photometric_loss(const ImageBuffer& render, const ImageBuffer& target, double lambda,
                            const SsimSettings& settings = {});

// ---- Adam -----------------------------------------------------------------

struct LearningRates {
    double position = 1.6e-4;
    /// Position rate decays log-linearly to this value over the run.
    double position_final = 1.6e-5;
    double color = 1e-2;
    /// Higher SH bands train at color / color_rest_divisor.
    double color_rest_divisor = 20.0;
    double opacity = 5e-2;
    double scale = 5e-3;
    double rotation = 1e-3;

    double for_group(ParamGroup g) const;
    /// Same rates with the position rate replaced by its value at `progress` in [0, 1].
    LearningRates at_progress(double progress) const;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// Adam moments (param_count(sh_degree) scalars per splat, row-major) and
/// densification statistics, kept in lockstep with Scene::splats.
struct OptimState {
    int sh_degree = 0;
    std::vector<double> m;
    std::vector<double> v;
    std::vector<double> grad_accum;
    std::vector<int> grad_count;
    std::int64_t step = 0;

    OptimState() = default;
    OptimState(std::size_t n, int sh_degree);

    int stride() const { return param_count(sh_degree); }
    std::size_t size() const { return grad_accum.size(); }
    /// Rebuilds the arrays so row i is a copy of old row source[i], or all zeros
    /// where fresh[i] is set (an empty mask copies every row).
    void gather(const std::vector<std::size_t>& source, const std::vector<bool>& fresh = {});
    void reset_stats();
    /// Throws ValidationError if the array lengths disagree with `n` splats.
    void require_size(std::size_t n) const;
};

/// One Adam update of every splat parameter; quaternions are renormalized afterwards.
void adam_step(Scene& scene, const RenderGradients& grads, OptimState& state,
               const LearningRates& lr, const AdamHyper& hyper = {});

/// Adds this view's screen-space gradient norm to the densification statistics.
void accumulate_densify_stats(OptimState& state, const RenderGradients& grads);

// ---- densification --------------------------------------------------------

struct DensifyConfig {
    double prune_opacity = 0.005;
    double split_scale_factor = 1.6;
    double grad_threshold = 2e-4;
    /// Splats whose largest scale exceeds percent_dense * scene_extent are split, others cloned.
    double percent_dense = 0.01;
    double scene_extent = 2.75;
    int split_children = 2;
};

struct DensifyReport {
    int cloned = 0;
    int split = 0;
    int pruned = 0;
};

DensifyReport densify_and_prune(Scene& scene, OptimState& state, const DensifyConfig& config,
                                std::mt19937_64& rng);

// ---- reconstruction -------------------------------------------------------

struct TrainingView {
    Camera camera;
    ImageBuffer image;  // RGB or RGBA; only RGB is fitted
};

struct ReconConfig {
    int n_initial = 10000;
    int n_steps = 3000;
    int densify_interval = 50;
    /// No densification after this fraction of the run; pruning continues.
    double densify_until = 0.5;
    double loss_lambda = 0.2;
    DensifyConfig densify;
    LearningRates lr;
    AdamHyper adam;
    int sh_degree = 0;
    /// Initial splats are uniform in [-init_extent, init_extent]^3.
    double init_extent = 1.0;
    double init_opacity = 0.1;
    std::uint64_t seed = 0;

    /// Throws ValidationError on non-positive or inconsistent fields.
    void validate() const;
};

struct ReconObserver {
    std::function<void(int step, double loss, const Scene&)> on_step;
    std::function<void(int step, const DensifyReport&, std::size_t before, std::size_t after)>
        on_densify;
    int checkpoint_interval = 0;
    std::function<void(int step, const Scene&)> on_checkpoint;
};

/// n_initial splats uniform in the cube, opacity init_opacity, mid-gray, isotropic
/// scale = mean distance to the three nearest neighbours.
Scene initialize_scene(const ReconConfig& config, std::mt19937_64& rng);

Scene reconstruct(const std::vector<TrainingView>& targets, const ReconConfig& config,
                  const ReconObserver& observer = {});

} // namespace gsedit
