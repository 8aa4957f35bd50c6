#include <algorithm>
#include <cmath>
#include <deque>

#include "gsedit/error.hpp"
#include "gsedit/mesh.hpp"
#include "gsedit/parallel.hpp"
#include "gsedit/renderer.hpp"

namespace gsedit {
namespace {

struct TexelSample {
    std::size_t index;
    Eigen::Vector3d point;
    Eigen::Vector3d normal;
};

std::vector<TexelSample> covered_texels(const Mesh& mesh, int size)
{
    const std::vector<std::int32_t> owner = texel_faces(mesh, size, size);
    std::vector<TexelSample> out;
    for (std::size_t i = 0; i < owner.size(); ++i) {
        const std::int32_t f = owner[i];
        if (f < 0) continue;
        const Face& face = mesh.faces[f];
        const Eigen::Vector2d p(static_cast<double>(i % size) + 0.5, static_cast<double>(i / size) + 0.5);
        const Eigen::Vector2d a = uv_to_texel(mesh.uvs[face[0]], size, size);
        const Eigen::Vector2d b = uv_to_texel(mesh.uvs[face[1]], size, size);
        const Eigen::Vector2d c = uv_to_texel(mesh.uvs[face[2]], size, size);
        const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        double l0 = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
        double l1 = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
        l0 = std::clamp(l0, 0.0, 1.0);
        l1 = std::clamp(l1, 0.0, 1.0 - l0);
        const double l2 = 1.0 - l0 - l1;
        out.push_back({i,
                       l0 * mesh.vertices[face[0]] + l1 * mesh.vertices[face[1]] + l2 * mesh.vertices[face[2]],
                       face_normal(mesh, f)});
    }
    return out;
}

/// Every texel without a color takes the color of the nearest colored texel (4-neighbour BFS).
void dilate(ImageBuffer& tex, std::vector<bool>& known, const Eigen::Vector3d& fallback)
{
    const int w = tex.width(), h = tex.height();
    std::deque<int> queue;
    for (int i = 0; i < w * h; ++i) {
        if (known[i]) queue.push_back(i);
    }
    if (queue.empty()) {
        for (int i = 0; i < w * h; ++i) {
            for (int c = 0; c < 3; ++c) tex.data()[static_cast<std::size_t>(i) * tex.channels() + c] = fallback[c];
        }
        return;
    }
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        const int x = i % w, y = i / w;
        const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (const auto& n : nbr) {
            if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
            const int j = n[1] * w + n[0];
            if (known[j]) continue;
            known[j] = true;
            for (int c = 0; c < 3; ++c) tex.at(n[0], n[1], c) = tex.at(x, y, c);
            queue.push_back(j);
        }
    }
}

} // namespace

ImageBuffer backproject_colors(const Mesh& mesh, const Scene& scene, const CameraRig& rig,
                               const BackprojectSettings& settings)
{
    mesh.validate();
    if (!mesh.has_uvs()) throw ValidationError("backproject_colors: mesh has no UVs");
    if (settings.texture_size < 1) throw ValidationError("backproject_colors: invalid texture size");
    const int size = settings.texture_size;
    const std::vector<TexelSample> texels = covered_texels(mesh, size);
    std::vector<Eigen::Vector3d> sum(texels.size(), Eigen::Vector3d::Zero());
    std::vector<double> weight(texels.size(), 0.0);
    const Eigen::Vector3d bg = scene.background.cast<double>();

    for (const Camera& camera : rig) {
        const ForwardPass fwd = rasterize(scene, camera);
        parallel_for(static_cast<int>(texels.size()), [&](int i) {
            const TexelSample& t = texels[i];
            const Eigen::Vector3d to_cam = camera.position() - t.point;
            const double cos_view = t.normal.dot(to_cam.normalized());
            if (cos_view <= 0.0) return;
            const Eigen::Vector3d pc = camera.to_camera(t.point);
            if (pc.z() <= 0.0) return;
            const Eigen::Vector2d px = camera.project(pc);
            const int x = static_cast<int>(std::floor(px.x()));
            const int y = static_cast<int>(std::floor(px.y()));
            if (x < 0 || y < 0 || x >= camera.width() || y >= camera.height()) return;
            const double alpha = fwd.image.at(x, y, 3);
            if (alpha < settings.min_alpha) return;
            if (pc.z() > fwd.depth.at(x, y, 0) + settings.depth_tolerance) return;
            Eigen::Vector3d rgb;
            for (int c = 0; c < 3; ++c) {
                rgb[c] = std::clamp((fwd.image.at(x, y, c) - (1.0 - alpha) * bg[c]) / alpha, 0.0, 1.0);
            }
            sum[i] += cos_view * rgb;
            weight[i] += cos_view;
        });
    }

    ImageBuffer tex(size, size, 3);
    std::vector<bool> known(static_cast<std::size_t>(size) * size, false);
    for (std::size_t i = 0; i < texels.size(); ++i) {
        if (weight[i] <= 0.0) continue;
        const Eigen::Vector3d c = sum[i] / weight[i];
        const int x = static_cast<int>(texels[i].index % size);
        const int y = static_cast<int>(texels[i].index / size);
        for (int ch = 0; ch < 3; ++ch) tex.at(x, y, ch) = c[ch];
        known[texels[i].index] = true;
    }
    dilate(tex, known, bg);
    return tex;
}

ImageBuffer SharpenRefiner::refine(const ImageBuffer& coarse, double, const std::string&, std::mt19937_64&)
{
    const int w = coarse.width(), h = coarse.height();
    auto clamped = [&](int x, int y, int c) {
        return coarse.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1), c);
    };
    ImageBuffer out = coarse;
    const bool has_alpha = coarse.channels() >= 4;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (has_alpha && coarse.at(x, y, 3) < 0.5) continue;
            for (int c = 0; c < 3; ++c) {
                // 3x3 binomial blur.
                double blur = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        blur += (2 - std::abs(dx)) * (2 - std::abs(dy)) * clamped(x + dx, y + dy, c);
                    }
                }
                blur /= 16.0;
                const double sharp = std::clamp(coarse.at(x, y, c) + amount_ * (coarse.at(x, y, c) - blur), 0.0, 1.0);
                out.at(x, y, c) = std::round(sharp * (levels_ - 1)) / (levels_ - 1);
            }
        }
    }
    return out;
}

ImageBuffer DenoiseRefiner::refine(const ImageBuffer& coarse, double t_start, const std::string& prompt,
                                   std::mt19937_64& rng)
{
    if (steps_ < 1) throw ValidationError("denoise refiner needs at least one step");
    const LatentImage condition = codec_.encode(coarse);
    LatentImage eps(condition.width(), condition.height(), condition.channels());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : eps.data()) v = normal(rng);
    LatentImage zt = add_noise(condition, t_start, eps);
    LatentImage z0 = condition;
    LatentImage implied(condition.width(), condition.height(), condition.channels());

    for (int k = 0; k < steps_; ++k) {
        const double t = t_start * (1.0 - static_cast<double>(k) / steps_);
        const double t_next = t_start * (1.0 - static_cast<double>(k + 1) / steps_);
        const double ab = alpha_bar(t);
        const double s = std::sqrt(ab), n = std::sqrt(1.0 - ab);
        for (std::size_t i = 0; i < zt.size(); ++i) implied.data()[i] = (zt.data()[i] - s * z0.data()[i]) / n;

        OracleRequest req;
        req.noisy = &zt;
        req.t = t;
        req.condition = &condition;
        req.prompt = prompt;
        req.noise = &implied;
        req.clean = &z0;
        req.codec = &codec_;
        req.alpha_bar = ab;
        const LatentImage eps_hat = oracle_.predict_noise(req);
        if (!eps_hat.same_shape(zt)) throw OracleError("refine oracle returned a latent of the wrong shape");

        for (std::size_t i = 0; i < zt.size(); ++i) z0.data()[i] = (zt.data()[i] - n * eps_hat.data()[i]) / s;
        if (k + 1 < steps_) {
            const double ab_next = alpha_bar(t_next);
            for (std::size_t i = 0; i < zt.size(); ++i) {
                zt.data()[i] = std::sqrt(ab_next) * z0.data()[i] + std::sqrt(1.0 - ab_next) * eps_hat.data()[i];
            }
        }
    }

    const ImageBuffer rgb = codec_.decode(z0);
    ImageBuffer out = coarse;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            if (coarse.channels() >= 4 && coarse.at(x, y, 3) < 0.5) continue;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = std::clamp(rgb.at(x, y, c), 0.0, 1.0);
        }
    }
    return out;
}

namespace {

class OwningDenoiseRefiner final : public RefineOracle {
public:
    explicit OwningDenoiseRefiner(std::unique_ptr<EditOracle> oracle)
        : oracle_(std::move(oracle)), inner_(*oracle_, codec_)
    {
    }
    std::string name() const override { return inner_.name(); }
    ImageBuffer refine(const ImageBuffer& coarse, double t_start, const std::string& prompt,
                       std::mt19937_64& rng) override
    {
        return inner_.refine(coarse, t_start, prompt, rng);
    }

private:
    std::unique_ptr<EditOracle> oracle_;
    IdentityCodec codec_;
    DenoiseRefiner inner_;
};

} // namespace

std::unique_ptr<RefineOracle> builtin_refiner(const std::string& name, const OracleParams& params)
{
    if (name == "identity") return std::make_unique<IdentityRefiner>();
    if (name == "sharpen") return std::make_unique<SharpenRefiner>();
    return std::make_unique<OwningDenoiseRefiner>(builtin_oracle(name, params));
}

RefineResult refine_texture(const Mesh& mesh, const CameraRig& rig, RefineOracle& oracle,
                            const std::string& prompt, const RefineConfig& config)
{
    mesh.validate();
    if (config.n_steps < 0) throw ValidationError("refine: n_steps must be non-negative");
    if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0)) {
        throw ValidationError("refine: learning rate must lie in (0, 1]");
    }
    if (!(config.t_start > 0.0 && config.t_start < 1.0)) throw ValidationError("refine: t_start must lie in (0, 1)");
    RefineResult result;
    result.mesh = mesh;
    if (config.n_steps == 0) return result;
    if (!mesh.has_uvs() || mesh.texture.empty()) throw ValidationError("refine: mesh needs UVs and a texture");
    if (rig.empty()) throw ValidationError("refine: empty camera rig");

    ImageBuffer& tex = result.mesh.texture;
    const int channels = tex.channels();
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick(0, rig.size() - 1);
    std::vector<Eigen::Vector3d> residual_sum(tex.pixel_count());
    std::vector<int> residual_count(tex.pixel_count());
    int consecutive_failures = 0;

    for (int step = 0; step < config.n_steps; ++step) {
        const Camera& camera = rig[pick(rng)];
        const MeshRaster raster = rasterize_mesh(result.mesh, camera);
        ImageBuffer fine;
        try {
            fine = oracle.refine(raster.image, config.t_start, prompt, rng);
            if (fine.width() != raster.image.width() || fine.height() != raster.image.height() ||
                fine.channels() < 3) {
                throw OracleError("refine oracle returned an image of the wrong shape");
            }
        } catch (const OracleError&) {
            ++result.oracle_failures;
            if (++consecutive_failures > config.max_oracle_failures) throw;
            result.steps_run = step + 1;
            continue;
        }
        consecutive_failures = 0;

        std::fill(residual_sum.begin(), residual_sum.end(), Eigen::Vector3d::Zero());
        std::fill(residual_count.begin(), residual_count.end(), 0);
        double sq = 0.0;
        std::size_t covered = 0;
        for (int y = 0; y < camera.height(); ++y) {
            for (int x = 0; x < camera.width(); ++x) {
                const std::int32_t t = raster.texel[static_cast<std::size_t>(y) * camera.width() + x];
                if (t < 0) continue;
                Eigen::Vector3d r;
                for (int c = 0; c < 3; ++c) r[c] = raster.image.at(x, y, c) - fine.at(x, y, c);
                residual_sum[t] += r;
                ++residual_count[t];
                sq += r.squaredNorm();
                ++covered;
            }
        }
        for (std::size_t t = 0; t < residual_sum.size(); ++t) {
            if (residual_count[t] == 0 || residual_sum[t].isZero(0.0)) continue;
            const Eigen::Vector3d step_dir = residual_sum[t] / residual_count[t];
            for (int c = 0; c < 3; ++c) {
                double& v = tex.data()[t * channels + c];
                v = std::clamp(v - config.learning_rate * step_dir[c], 0.0, 1.0);
            }
        }
        result.mse_history.push_back(covered ? sq / (3.0 * covered) : 0.0);
        result.steps_run = step + 1;
    }
    return result;
}

} // namespace gsedit
