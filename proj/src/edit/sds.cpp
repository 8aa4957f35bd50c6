#include <algorithm>
#include <cmath>

#include "gsedit/edit.hpp"
#include "gsedit/error.hpp"

namespace gsedit {

LearningRates EditConfig::default_rates()
{
    LearningRates lr;
    lr.position = 1.6e-5;
    lr.position_final = 1.6e-5;
    lr.color = 1e-2;
    lr.opacity = 1e-2;
    lr.scale = 1e-3;
    lr.rotation = 1e-3;
    return lr;
}

void EditConfig::validate() const
{
    if (n_edit_steps < 0) throw ValidationError("n_edit_steps must be non-negative");
    if (!(t_min > 0.0 && t_min <= t_max && t_max < 1.0)) {
        throw ValidationError("need 0 < t_min <= t_max < 1");
    }
    if (!(text_scale >= 0.0) || !(image_scale >= 0.0)) {
        throw ValidationError("guidance scales must be non-negative");
    }
    if (!std::isfinite(weight_scale)) throw ValidationError("weight_scale must be finite");
    if (convergence_window < 1 || !(convergence_threshold >= 0.0)) {
        throw ValidationError("convergence window must be positive, threshold non-negative");
    }
    if (max_oracle_failures < 0) throw ValidationError("max_oracle_failures must be non-negative");
}

SdsResult sds_step(const Scene& scene, const Camera& camera, EditOracle& oracle,
                   const ImageCodec& codec, const NoiseSchedule& schedule,
                   const LatentImage& condition, const std::string& prompt,
                   const EditConfig& config, std::mt19937_64& rng)
{
    if (scene.empty()) throw ValidationError("sds_step: scene is empty");
    const RasterSettings raster;
    const ForwardPass fwd = rasterize(scene, camera, raster);
    const LatentImage z = codec.encode(fwd.image);
    if (!z.same_shape(condition)) throw ValidationError("sds_step: condition latent shape mismatch");

    SdsDiagnostics diag;
    diag.t = sample_timestep(schedule, rng);
    diag.alpha_bar = alpha_bar(diag.t);
    diag.weight = schedule.weight(diag.t);

    LatentImage eps(z.width(), z.height(), z.channels());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : eps.data()) v = normal(rng);
    const LatentImage zt = add_noise(z, diag.t, eps);

    OracleRequest request;
    request.noisy = &zt;
    request.t = diag.t;
    request.condition = &condition;
    request.prompt = prompt;
    request.text_scale = config.text_scale;
    request.image_scale = config.image_scale;
    request.noise = &eps;
    request.clean = &z;
    request.codec = &codec;
    request.alpha_bar = diag.alpha_bar;
    const LatentImage eps_hat = oracle.predict_noise(request);
    if (!eps_hat.same_shape(eps)) throw OracleError("oracle returned a latent of the wrong shape");
    for (double v : eps_hat.data()) {
        if (!std::isfinite(v)) throw OracleError("oracle returned a non-finite value");
    }

    // dL/dz = w(t) * (eps_hat - eps); dz_t/dz = sqrt(alpha_bar).
    const double coeff = diag.weight * std::sqrt(diag.alpha_bar);
    LatentImage upstream(z.width(), z.height(), z.channels());
    double sq = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double delta = eps_hat.data()[i] - eps.data()[i];
        sq += delta * delta;
        upstream.data()[i] = coeff * delta;
    }
    diag.residual_norm = std::sqrt(sq);
    diag.residual_rms = diag.residual_norm / std::sqrt(static_cast<double>(eps.size()));

    const ImageBuffer pixel_grad = codec.encode_backward(upstream, camera.width(), camera.height());
    return {backward(fwd, scene, camera, pixel_grad, raster), diag};
}

EditResult edit(const Scene& scene, const CameraRig& rig, EditOracle& oracle,
                const ImageCodec& codec, const std::string& prompt, const EditConfig& config,
                const EditObserver& observer)
{
    config.validate();
    EditResult result;
    result.scene = scene;
    if (config.n_edit_steps == 0) return result;
    if (rig.empty()) throw ValidationError("edit needs at least one camera");
    if (scene.empty()) throw ValidationError("edit needs a nonempty scene");

    // c_I: the original renders, encoded once.
    std::vector<LatentImage> conditions;
    conditions.reserve(rig.size());
    for (const Camera& cam : rig) conditions.push_back(codec.encode(render(scene, cam)));

    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick(0, rig.size() - 1);
    OptimState state(result.scene.size(), result.scene.sh_degree);
    NoiseSchedule schedule;
    schedule.t_min = config.t_min;
    schedule.t_max = config.t_max;
    // The bound reaches t_min on the last step.
    schedule.total = std::max(1, config.n_edit_steps - 1);
    schedule.weighting = config.weighting;
    schedule.weight_scale = config.weight_scale;

    int consecutive_failures = 0;
    for (int step = 0; step < config.n_edit_steps; ++step) {
        schedule.step = step;
        const std::size_t cam = pick(rng);
        SdsResult sds;
        try {
            sds = sds_step(result.scene, rig[cam], oracle, codec, schedule, conditions[cam], prompt,
                           config, rng);
        } catch (const OracleError& e) {
            ++result.oracle_failures;
            if (observer.on_oracle_failure) observer.on_oracle_failure(step, e.what());
            if (++consecutive_failures > config.max_oracle_failures) throw;
            result.steps_run = step + 1;
            continue;
        }
        consecutive_failures = 0;
        adam_step(result.scene, sds.grads, state, config.lr, config.adam);
        result.residual_history.push_back(sds.diagnostics.residual_rms);
        result.timesteps.push_back(sds.diagnostics.t);
        result.steps_run = step + 1;
        if (observer.on_step) observer.on_step(step, static_cast<int>(cam), sds.diagnostics, result.scene);
        if (convergence_check(result.residual_history, config.convergence_window,
                              config.convergence_threshold)) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace gsedit
