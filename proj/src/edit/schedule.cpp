#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gsedit/edit.hpp"
#include "gsedit/error.hpp"

namespace gsedit {
namespace {

constexpr double kCosineOffset = 0.008;

double cosine_f(double t)
{
    const double c = std::cos((t + kCosineOffset) / (1.0 + kCosineOffset) * std::numbers::pi / 2.0);
    return c * c;
}

} // namespace

double alpha_bar(double t)
{
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("alpha_bar: t must lie in [0, 1]");
    return std::clamp(cosine_f(t) / cosine_f(0.0), 0.0, 1.0);
}

double NoiseSchedule::upper_bound() const
{
    // t_max - (t_max - t_min) * step / total, written to land exactly on t_min at the end.
    return t_min + (t_max - t_min) * static_cast<double>(total - step) / static_cast<double>(total);
}

double NoiseSchedule::weight(double t) const
{
    const double base = weighting == Weighting::constant ? 1.0 : 1.0 - alpha_bar(t);
    return weight_scale * base;
}

void NoiseSchedule::validate() const
{
    if (!(t_min > 0.0 && t_min <= t_max && t_max < 1.0)) {
        throw ValidationError("schedule: need 0 < t_min <= t_max < 1");
    }
    if (total < 1 || step < 0 || step > total) {
        throw ValidationError("schedule: step out of range");
    }
}

double sample_timestep(const NoiseSchedule& schedule, std::mt19937_64& rng)
{
    schedule.validate();
    const double hi = schedule.upper_bound();
    if (hi <= schedule.t_min) return schedule.t_min;
    std::uniform_real_distribution<double> u(schedule.t_min, hi);
    return std::clamp(u(rng), schedule.t_min, hi);
}

LatentImage add_noise(const LatentImage& z, double t, const LatentImage& eps)
{
    if (!z.same_shape(eps)) throw ValidationError("add_noise: latent and noise shapes differ");
    const double ab = alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    LatentImage out(z.width(), z.height(), z.channels());
    for (std::size_t i = 0; i < z.size(); ++i) out.data()[i] = a * z.data()[i] + b * eps.data()[i];
    return out;
}

bool convergence_check(std::span<const double> history, int window, double threshold)
{
    if (window < 1) throw ValidationError("convergence window must be positive");
    if (history.size() < static_cast<std::size_t>(window)) return false;
    const auto tail = history.last(static_cast<std::size_t>(window));
    const double mean = std::accumulate(tail.begin(), tail.end(), 0.0) / window;
    return mean < threshold;
}

} // namespace gsedit
