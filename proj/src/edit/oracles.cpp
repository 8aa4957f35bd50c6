#include <algorithm>
#include <cmath>

#include "gsedit/color.hpp"
#include "gsedit/edit.hpp"
#include "gsedit/error.hpp"

namespace gsedit {
namespace {

Eigen::Vector3d pixel(const ImageBuffer& img, int x, int y)
{
    return {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
}

void set_pixel(ImageBuffer& img, int x, int y, const Eigen::Vector3d& rgb)
{
    for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(rgb[c], 0.0, 1.0);
}

} // namespace

double foreground_weight(const Eigen::Vector3d& rgb)
{
    return std::clamp((1.0 - rgb.minCoeff()) / 0.1, 0.0, 1.0);
}

LatentImage IdentityOracle::predict_noise(const OracleRequest& request)
{
    if (!request.noise) throw OracleError("identity oracle needs the injected noise");
    return *request.noise;
}

LatentImage ProceduralOracle::predict_noise(const OracleRequest& request)
{
    if (!request.noise || !request.clean || !request.codec || !request.condition) {
        throw OracleError(name() + " oracle needs in-process ground truth");
    }
    const LatentImage& eps = *request.noise;
    const LatentImage& z = *request.clean;
    if (!eps.same_shape(z)) throw OracleError("oracle: noise and latent shapes differ");

    const ImageBuffer goal = target(request.codec->decode(*request.condition), request.prompt);
    const LatentImage goal_latent = request.codec->encode(goal);
    if (!goal_latent.same_shape(z)) throw OracleError("oracle: target latent shape mismatch");

    const double kappa = strength_ * request.text_scale / 100.0 * std::sqrt(request.alpha_bar);
    LatentImage out = eps;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] += kappa * (z.data()[i] - goal_latent.data()[i]);
    }
    return out;
}

HueShiftOracle::HueShiftOracle(std::optional<double> hue_deg, double strength, double saturation)
    : ProceduralOracle(strength), hue_(hue_deg), saturation_(saturation)
{
    if (!(saturation >= 0.0 && saturation <= 1.0)) throw ValidationError("saturation must lie in [0, 1]");
}

ImageBuffer HueShiftOracle::target(const ImageBuffer& source, const std::string& prompt) const
{
    const std::optional<double> hue = hue_ ? hue_ : hue_from_text(prompt);
    if (!hue) throw ValidationError("hue_shift: no target hue given and none named in the prompt");
    const Eigen::Vector3d gray_ink(0.5, 0.5, 0.5);
    const Eigen::Vector3d u =
        (Eigen::Vector3d::Ones() - hsv_to_rgb({*hue, saturation_, 0.5})).cwiseQuotient(gray_ink);
    ImageBuffer out(source.width(), source.height(), 3);
    for (int y = 0; y < source.height(); ++y) {
        for (int x = 0; x < source.width(); ++x) {
            const Eigen::Vector3d ink =
                (Eigen::Vector3d::Ones() - pixel(source, x, y)).cwiseMax(0.0).cwiseMin(1.0);
            set_pixel(out, x, y, Eigen::Vector3d::Ones() - ink.mean() * u);
        }
    }
    return out;
}

BrightnessOracle::BrightnessOracle(double delta, double strength)
    : ProceduralOracle(strength), delta_(delta)
{
}

ImageBuffer BrightnessOracle::target(const ImageBuffer& source, const std::string&) const
{
    ImageBuffer out(source.width(), source.height(), 3);
    for (int y = 0; y < source.height(); ++y) {
        for (int x = 0; x < source.width(); ++x) {
            const Eigen::Vector3d rgb = pixel(source, x, y);
            set_pixel(out, x, y, rgb.array() + delta_ * foreground_weight(rgb));
        }
    }
    return out;
}

RegionDarkenOracle::RegionDarkenOracle(double fraction, double factor, double strength)
    : ProceduralOracle(strength), fraction_(fraction), factor_(factor)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("region fraction must lie in (0, 1]");
    if (!(factor >= 0.0)) throw ValidationError("region factor must be non-negative");
}

ImageBuffer RegionDarkenOracle::target(const ImageBuffer& source, const std::string&) const
{
    int top = source.height(), bottom = -1;
    for (int y = 0; y < source.height(); ++y) {
        for (int x = 0; x < source.width(); ++x) {
            if (foreground_weight(pixel(source, x, y)) > 0.5) {
                top = std::min(top, y);
                bottom = std::max(bottom, y);
            }
        }
    }
    ImageBuffer out(source.width(), source.height(), 3);
    const double limit = top + fraction_ * (bottom - top + 1);
    for (int y = 0; y < source.height(); ++y) {
        for (int x = 0; x < source.width(); ++x) {
            const Eigen::Vector3d rgb = pixel(source, x, y);
            const double m = (bottom >= 0 && y < limit) ? foreground_weight(rgb) : 0.0;
            set_pixel(out, x, y, rgb * (1.0 - m * (1.0 - factor_)));
        }
    }
    return out;
}

std::unique_ptr<EditOracle> builtin_oracle(const std::string& name, const OracleParams& p)
{
    if (name == "identity") return std::make_unique<IdentityOracle>();
    if (name == "hue_shift") return std::make_unique<HueShiftOracle>(p.hue_deg, p.strength);
    if (name == "brightness") return std::make_unique<BrightnessOracle>(p.brightness, p.strength);
    if (name == "region_darken") {
        return std::make_unique<RegionDarkenOracle>(p.region_fraction, p.region_factor, p.strength);
    }
    if (name == "remote") {
        if (p.url.empty()) throw ValidationError("remote oracle needs a url");
        return std::make_unique<RemoteOracle>(p.url, p.timeout, p.retries);
    }
    throw ValidationError("unknown oracle '" + name + "'");
}

} // namespace gsedit
