#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gsedit/camera.hpp"
#include "gsedit/image.hpp"
#include "gsedit/optimizer.hpp"
#include "gsedit/renderer.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

/// Latent images share the pixel container; channel count is codec specific.
using LatentImage = ImageBuffer;

// ---- codecs ---------------------------------------------------------------

class ImageCodec {
public:
    virtual ~ImageCodec() = default;
    virtual std::string name() const = 0;
    /// RGB (first three channels of `image`) to latent.
    virtual LatentImage encode(const ImageBuffer& image) const = 0;
    virtual ImageBuffer decode(const LatentImage& latent) const = 0;
    /// Transpose of encode's Jacobian: latent-space gradient to a W x H x 3 pixel gradient.
    virtual ImageBuffer encode_backward(const LatentImage& grad, int width, int height) const = 0;
};

/// latent = RGB pixels.
class IdentityCodec final : public ImageCodec {
public:
    std::string name() const override { return "identity"; }
    LatentImage encode(const ImageBuffer& image) const override;
    ImageBuffer decode(const LatentImage& latent) const override;
    ImageBuffer encode_backward(const LatentImage& grad, int width, int height) const override;
};

/// Area-average downsampling by `factor`; decode replicates each latent texel.
class DownsampleCodec final : public ImageCodec {
public:
    explicit DownsampleCodec(int factor = 8);
    std::string name() const override { return "downsample"; }
    int factor() const { return factor_; }
    LatentImage encode(const ImageBuffer& image) const override;
    ImageBuffer decode(const LatentImage& latent) const override;
    ImageBuffer encode_backward(const LatentImage& grad, int width, int height) const override;

private:
    int factor_;
};

/// "identity" or "downsample" / "downsample:<factor>".
std::unique_ptr<ImageCodec> make_codec(const std::string& spec);

// ---- noise schedule -------------------------------------------------------

/// Cosine-schedule cumulative signal rate, normalized so alpha_bar(0) = 1.
double alpha_bar(double t);

enum class Weighting { constant, one_minus_alpha_bar };

struct NoiseSchedule {
    double t_min = 0.02;
    double t_max = 0.98;
    int step = 0;
    int total = 1;
    Weighting weighting = Weighting::constant;
    /// Global factor on w(t).
    double weight_scale = 1.0;

    /// Linearly decreasing upper bound u(step).
    double upper_bound() const;
    double weight(double t) const;
    void validate() const;
};

/// Uniform draw from [t_min, u(step)].
double sample_timestep(const NoiseSchedule& schedule, std::mt19937_64& rng);

/// sqrt(alpha_bar(t)) z + sqrt(1 - alpha_bar(t)) eps.
LatentImage add_noise(const LatentImage& z, double t, const LatentImage& eps);

/// True when the mean of the last `window` entries of `history` is below `threshold`.
/// Entries are per-step RMS residuals ||eps_hat - eps|| / sqrt(latent size).
bool convergence_check(std::span<const double> history, int window, double threshold);

// ---- oracles --------------------------------------------------------------

/// Everything an oracle may look at. `noise`, `clean` and `codec` are privileged
/// ground truth that only in-process stand-ins use; they never go over the wire.
struct OracleRequest {
    const LatentImage* noisy = nullptr;
    double t = 0.0;
    const LatentImage* condition = nullptr;
    std::string prompt;
    double text_scale = 100.0;
    double image_scale = 10.0;

    const LatentImage* noise = nullptr;
    const LatentImage* clean = nullptr;
    const ImageCodec* codec = nullptr;
    double alpha_bar = 1.0;
};

class EditOracle {
public:
    virtual ~EditOracle() = default;
    virtual std::string name() const = 0;
    /// Predicted noise with the shape of *request.noisy. Throws OracleError on failure.
    virtual LatentImage predict_noise(const OracleRequest& request) = 0;
};

/// Returns the injected noise: no edit.
class IdentityOracle final : public EditOracle {
public:
    std::string name() const override { return "identity"; }
    LatentImage predict_noise(const OracleRequest& request) override;
};

/// Pixel-space edit target g(decode(c_I)). The oracle answers
/// eps_hat = eps + kappa * sqrt(alpha_bar) * (z - encode(g)), kappa = strength * s_T / 100,
/// so the residual points from the current image toward the target.
class ProceduralOracle : public EditOracle {
public:
    explicit ProceduralOracle(double strength) : strength_(strength) {}
    LatentImage predict_noise(const OracleRequest& request) override;
    virtual ImageBuffer target(const ImageBuffer& source, const std::string& prompt) const = 0;
    double strength() const { return strength_; }

private:
    double strength_;
};

/// Recolors toward a target hue (from the prompt if not given). The map is linear in
/// ink = 1 - rgb: ink' = mean(ink) * u, with u chosen so mid-gray becomes
/// HSV(hue, saturation, 0.5). Linearity makes it commute with alpha blending over the
/// white background, so partially covered edge pixels ask for the same material as the
/// interior and white stays white.
class HueShiftOracle final : public ProceduralOracle {
public:
    HueShiftOracle(std::optional<double> hue_deg, double strength, double saturation = 0.75);
    std::string name() const override { return "hue_shift"; }
    ImageBuffer target(const ImageBuffer& source, const std::string& prompt) const override;

private:
    std::optional<double> hue_;
    double saturation_;
};

/// Adds `delta` to the foreground.
class BrightnessOracle final : public ProceduralOracle {
public:
    BrightnessOracle(double delta, double strength);
    std::string name() const override { return "brightness"; }
    ImageBuffer target(const ImageBuffer& source, const std::string& prompt) const override;

private:
    double delta_;
};

/// Scales the top `fraction` of the silhouette rows by `factor` (a stand-in for "add a hat").
class RegionDarkenOracle final : public ProceduralOracle {
public:
    RegionDarkenOracle(double fraction, double factor, double strength);
    std::string name() const override { return "region_darken"; }
    ImageBuffer target(const ImageBuffer& source, const std::string& prompt) const override;

private:
    double fraction_;
    double factor_;
};

/// Foreground weight of a pixel on a white background: 0 on white, 1 once any channel
/// is 0.1 below white.
double foreground_weight(const Eigen::Vector3d& rgb);

struct OracleParams {
    double strength = 1.0;
    std::optional<double> hue_deg;
    double brightness = 0.2;
    double region_fraction = 0.2;
    double region_factor = 0.4;
    std::string url;  // remote: http://host:port
    std::chrono::milliseconds timeout{30000};
    int retries = 2;
};

/// name in {identity, hue_shift, brightness, region_darken, remote}.
std::unique_ptr<EditOracle> builtin_oracle(const std::string& name, const OracleParams& params = {});

// ---- remote wire protocol -------------------------------------------------

struct WireRequest {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 0;
    float t = 0.f;
    float text_scale = 0.f;
    float image_scale = 0.f;
    std::string prompt;
    std::vector<float> noisy;      // width * height * channels, row-major
    std::vector<float> condition;  // same size
};

std::string encode_wire_request(const WireRequest& request);
/// Throws OracleError when the body is truncated or inconsistent.
WireRequest decode_wire_request(const std::string& body);
std::string encode_wire_response(const LatentImage& eps_hat);
LatentImage decode_wire_response(const std::string& body, int width, int height, int channels);

/// Client for POST /edit-noise. Transport errors and malformed replies are retried
/// `retries` times, then surface as OracleError.
class RemoteOracle final : public EditOracle {
public:
    RemoteOracle(std::string url, std::chrono::milliseconds timeout, int retries);
    std::string name() const override { return "remote"; }
    LatentImage predict_noise(const OracleRequest& request) override;

private:
    std::string url_;
    std::chrono::milliseconds timeout_;
    int retries_;
};

// ---- SDS step and edit loop -----------------------------------------------

struct EditConfig {
    int n_edit_steps = 500;
    double t_min = 0.02;
    double t_max = 0.98;
    double text_scale = 100.0;
    double image_scale = 10.0;
    Weighting weighting = Weighting::constant;
    double weight_scale = 1.0;
    LearningRates lr = default_rates();
    AdamHyper adam;
    int convergence_window = 50;
    double convergence_threshold = 0.01;
    /// Consecutive failed oracle calls tolerated before the edit aborts.
    int max_oracle_failures = 3;
    std::uint64_t seed = 0;

    /// Edit learning rates: position at 0.1x the reconstruction rate, no decay.
    static LearningRates default_rates();
    void validate() const;
};

struct SdsDiagnostics {
    double t = 0.0;
    double alpha_bar = 1.0;
    double weight = 1.0;
    double residual_norm = 0.0;  // ||eps_hat - eps||
    double residual_rms = 0.0;   // residual_norm / sqrt(latent size)
};

struct SdsResult {
    RenderGradients grads;
    SdsDiagnostics diagnostics;
};

/// One score-distillation step for `camera`. `condition` is the encoded original
/// render of this camera. The oracle is never differentiated.
SdsResult sds_step(const Scene& scene, const Camera& camera, EditOracle& oracle,
                   const ImageCodec& codec, const NoiseSchedule& schedule,
                   const LatentImage& condition, const std::string& prompt,
                   const EditConfig& config, std::mt19937_64& rng);

struct EditObserver {
    std::function<void(int step, int camera_index, const SdsDiagnostics&, const Scene&)> on_step;
    std::function<void(int step, const std::string& message)> on_oracle_failure;
};

struct EditResult {
    Scene scene;
    int steps_run = 0;
    bool converged = false;
    int oracle_failures = 0;
    std::vector<double> residual_history;
    std::vector<double> timesteps;
};

EditResult edit(const Scene& scene, const CameraRig& rig, EditOracle& oracle,
                const ImageCodec& codec, const std::string& prompt, const EditConfig& config,
                const EditObserver& observer = {});

} // namespace gsedit
