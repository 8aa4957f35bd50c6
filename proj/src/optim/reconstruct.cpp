#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gsedit/error.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit {

void ReconConfig::validate() const
{
    if (n_initial < 1) throw ValidationError("n_initial must be positive");
    if (n_steps < 0) throw ValidationError("n_steps must be non-negative");
    if (densify_interval < 1) throw ValidationError("densify_interval must be positive");
    if (n_steps > 0 && densify_interval > n_steps) {
        throw ValidationError("densify_interval must not exceed n_steps");
    }
    if (!(loss_lambda >= 0.0 && loss_lambda <= 1.0)) {
        throw ValidationError("loss_lambda must lie in [0, 1]");
    }
    if (!(densify.prune_opacity > 0.0 && densify.prune_opacity < 1.0)) {
        throw ValidationError("prune_opacity must lie in (0, 1)");
    }
    if (!(densify.split_scale_factor > 0.0) || !(densify.grad_threshold > 0.0) ||
        !(densify.percent_dense > 0.0) || !(densify.scene_extent > 0.0)) {
        throw ValidationError("densification parameters must be positive");
    }
    if (sh_degree < 0 || sh_degree > kMaxShDegree) {
        throw ValidationError("sh_degree must lie in [0, 3]");
    }
    if (!(init_extent > 0.0) || !(init_opacity > 0.0 && init_opacity < 1.0)) {
        throw ValidationError("initial extent and opacity out of range");
    }
}

Scene initialize_scene(const ReconConfig& config, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-config.init_extent, config.init_extent);
    const int n = config.n_initial;
    std::vector<Eigen::Vector3d> pts(n);
    for (auto& p : pts) p = Eigen::Vector3d(u(rng), u(rng), u(rng));

    Scene scene;
    scene.sh_degree = config.sh_degree;
    scene.splats.resize(n);
    const float opacity = static_cast<float>(logit(config.init_opacity));
    for (int i = 0; i < n; ++i) {
        // Three nearest neighbours by brute force.
        double best[3] = {std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity()};
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = (pts[i] - pts[j]).squaredNorm();
            if (d < best[2]) {
                best[2] = d;
                if (best[2] < best[1]) std::swap(best[1], best[2]);
                if (best[1] < best[0]) std::swap(best[0], best[1]);
            }
        }
        double mean = 0.0;
        int found = 0;
        for (double d : best) {
            if (std::isfinite(d)) {
                mean += std::sqrt(d);
                ++found;
            }
        }
        mean = found ? mean / found : config.init_extent;
        mean = std::max(mean, 1e-4);
        GaussianSplat& s = scene.splats[i];
        s.position = pts[i].cast<float>();
        s.log_scale = Eigen::Vector3f::Constant(static_cast<float>(std::log(mean)));
        s.opacity_logit = opacity;
    }
    return scene;
}

Scene reconstruct(const std::vector<TrainingView>& targets, const ReconConfig& config,
                  const ReconObserver& observer)
{
    config.validate();
    if (targets.empty()) throw ValidationError("reconstruct needs at least one target view");
    for (const auto& t : targets) {
        if (t.image.width() != t.camera.width() || t.image.height() != t.camera.height()) {
            throw ValidationError("target image does not match its camera");
        }
        if (t.image.width() != targets[0].image.width() ||
            t.image.height() != targets[0].image.height()) {
            throw ValidationError("target images must share dimensions");
        }
        if (t.image.channels() < 3) throw ValidationError("target images need RGB");
        t.image.require_finite("target image");
    }

    std::mt19937_64 rng(config.seed);
    Scene scene = initialize_scene(config, rng);
    OptimState state(scene.size(), scene.sh_degree);
    const RasterSettings raster;
    const int densify_last = static_cast<int>(std::floor(config.densify_until * config.n_steps));

    std::vector<std::size_t> order(targets.size());
    std::size_t cursor = order.size();
    for (int step = 1; step <= config.n_steps; ++step) {
        if (cursor == order.size()) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const TrainingView& view = targets[order[cursor++]];

        const ForwardPass fwd = rasterize(scene, view.camera, raster);
        const LossResult loss = photometric_loss(fwd.image, view.image, config.loss_lambda);
        const RenderGradients grads = backward(fwd, scene, view.camera, loss.grad, raster);
        accumulate_densify_stats(state, grads);
        const double progress =
            config.n_steps > 1 ? static_cast<double>(step - 1) / (config.n_steps - 1) : 0.0;
        adam_step(scene, grads, state, config.lr.at_progress(progress), config.adam);
        if (observer.on_step) observer.on_step(step, loss.value, scene);

        if (step % config.densify_interval == 0 && step < config.n_steps) {
            DensifyConfig dc = config.densify;
            if (step > densify_last) dc.grad_threshold = std::numeric_limits<double>::infinity();
            const std::size_t before = scene.size();
            const DensifyReport report = densify_and_prune(scene, state, dc, rng);
            if (observer.on_densify) observer.on_densify(step, report, before, scene.size());
        }
        if (observer.checkpoint_interval > 0 && observer.on_checkpoint &&
            step % observer.checkpoint_interval == 0) {
            observer.on_checkpoint(step, scene);
        }
    }
    return scene;
}

} // namespace gsedit
