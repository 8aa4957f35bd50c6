#include <algorithm>
#include <cmath>

#include "gsedit/error.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit {

double LearningRates::for_group(ParamGroup g) const
{
    switch (g) {
    case ParamGroup::position: return position;
    case ParamGroup::rotation: return rotation;
    case ParamGroup::scale: return scale;
    case ParamGroup::opacity: return opacity;
    case ParamGroup::color_dc: return color;
    case ParamGroup::color_rest: return color / color_rest_divisor;
    }
    return 0.0;
}

LearningRates LearningRates::at_progress(double progress) const
{
    LearningRates out = *this;
    const double t = std::clamp(progress, 0.0, 1.0);
    if (position > 0.0 && position_final > 0.0) {
        out.position = std::exp((1.0 - t) * std::log(position) + t * std::log(position_final));
    }
    return out;
}

OptimState::OptimState(std::size_t n, int degree)
    : sh_degree(degree),
      m(n * param_count(degree), 0.0),
      v(n * param_count(degree), 0.0),
      grad_accum(n, 0.0),
      grad_count(n, 0)
{
}

void OptimState::gather(const std::vector<std::size_t>& source, const std::vector<bool>& fresh)
{
    if (!fresh.empty() && fresh.size() != source.size()) {
        throw ValidationError("optimizer state gather: mask length mismatch");
    }
    const std::size_t k = stride();
    std::vector<double> m2(source.size() * k, 0.0), v2(source.size() * k, 0.0), acc(source.size(), 0.0);
    std::vector<int> cnt(source.size(), 0);
    for (std::size_t i = 0; i < source.size(); ++i) {
        const std::size_t s = source[i];
        if (!fresh.empty() && fresh[i]) {
            continue;  // zero moments and statistics
        }
        std::copy_n(m.begin() + s * k, k, m2.begin() + i * k);
        std::copy_n(v.begin() + s * k, k, v2.begin() + i * k);
        acc[i] = grad_accum[s];
        cnt[i] = grad_count[s];
    }
    m = std::move(m2);
    v = std::move(v2);
    grad_accum = std::move(acc);
    grad_count = std::move(cnt);
}

void OptimState::reset_stats()
{
    std::fill(grad_accum.begin(), grad_accum.end(), 0.0);
    std::fill(grad_count.begin(), grad_count.end(), 0);
}

void OptimState::require_size(std::size_t n) const
{
    const std::size_t k = stride();
    if (m.size() != n * k || v.size() != n * k || grad_accum.size() != n || grad_count.size() != n) {
        throw ValidationError("optimizer state does not match the scene size");
    }
}

void adam_step(Scene& scene, const RenderGradients& grads, OptimState& state,
               const LearningRates& lr, const AdamHyper& hyper)
{
    if (grads.size() != scene.size()) {
        throw ValidationError("adam_step: gradient count does not match the scene");
    }
    if (state.sh_degree != scene.sh_degree) {
        throw ValidationError("adam_step: optimizer state has a different SH degree");
    }
    state.require_size(scene.size());
    grads.require_finite();

    ++state.step;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    const int k = state.stride();
    std::vector<double> rate(k);
    for (int j = 0; j < k; ++j) rate[j] = lr.for_group(param_group(j));

    for (std::size_t i = 0; i < scene.size(); ++i) {
        GaussianSplat& s = scene.splats[i];
        const SplatGradient& g = grads.splats[i];
        double* m = state.m.data() + i * k;
        double* v = state.v.data() + i * k;
        bool rotated = false;
        for (int j = 0; j < k; ++j) {
            const double gj = grad_value(g, j);
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
            if (gj == 0.0 && m[j] == 0.0) continue;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            float& p = param_ref(s, j);
            p = static_cast<float>(p - rate[j] * mhat / (std::sqrt(vhat) + hyper.eps));
            rotated = rotated || param_group(j) == ParamGroup::rotation;
        }
        if (!rotated) continue;
        const float norm = s.rotation.norm();
        if (norm > 0.f && std::isfinite(norm)) {
            s.rotation /= norm;
        } else {
            s.rotation = Eigen::Vector4f(1.f, 0.f, 0.f, 0.f);
        }
    }
}

void accumulate_densify_stats(OptimState& state, const RenderGradients& grads)
{
    if (grads.size() != state.size()) {
        throw ValidationError("densify stats: gradient count does not match the state");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads.visible[i]) continue;
        state.grad_accum[i] += grads.mean2d_norm[i];
        state.grad_count[i] += 1;
    }
}

} // namespace gsedit
