#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "gsedit/error.hpp"
#include "gsedit/optimizer.hpp"

using namespace gsedit;
using namespace gsedit::testing;

namespace {

// Direct windowed SSIM: explicit 2D weights, zero padding, no separable filtering.
double naive_ssim(const ImageBuffer& a, const ImageBuffer& b)
{
    const int w = a.width(), h = a.height();
    double weights[11][11];
    double wsum = 0.0;
    for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
            const double dx = i - 5, dy = j - 5;
            weights[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            wsum += weights[i][j];
        }
    }
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int j = -5; j <= 5; ++j) {
                    for (int i = -5; i <= 5; ++i) {
                        const int xx = x + i, yy = y + j;
                        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                        const double k = weights[i + 5][j + 5] / wsum;
                        const double va = a.at(xx, yy, c), vb = b.at(xx, yy, c);
                        mx += k * va;
                        my += k * vb;
                        sxx += k * va * va;
                        syy += k * vb * vb;
                        sxy += k * va * vb;
                    }
                }
                const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
                total += (2 * mx * my + c1) * (2 * cov + c2) /
                         ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
    }
    return total / (3.0 * w * h);
}

GaussianSplat splat_with_logit(float logit_value, float log_scale)
{
    GaussianSplat s;
    s.opacity_logit = logit_value;
    s.log_scale = Eigen::Vector3f::Constant(log_scale);
    return s;
}

} // namespace

TEST_CASE("photometric_loss examples")
{
    std::mt19937_64 rng(3);
    const ImageBuffer a = random_image(rng, 20, 16, 3, 0, 1);
    const LossResult same = photometric_loss(a, a, 0.2);
    CHECK(same.value == 0.0);
    for (double g : same.grad.data()) CHECK(g == 0.0);

    ImageBuffer shifted = a;
    for (double& v : shifted.data()) v += 0.1;
    CHECK(photometric_loss(shifted, a, 0.0).value == doctest::Approx(0.1).epsilon(1e-12));

    CHECK_THROWS_AS(photometric_loss(a, ImageBuffer(20, 15, 3), 0.2), ValidationError);
    CHECK_THROWS_AS(photometric_loss(a, a, 1.5), ValidationError);
}

TEST_CASE("photometric_loss matches a direct SSIM and finite differences")
{
    std::mt19937_64 rng(17);
    const ImageBuffer r = random_image(rng, 24, 20, 3, 0, 1);
    const ImageBuffer t = random_image(rng, 24, 20, 4, 0, 1);
    const double lambda = 0.2;
    const LossResult res = photometric_loss(r, t, lambda);

    double l1 = 0.0;
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 24; ++x)
            for (int c = 0; c < 3; ++c) l1 += std::abs(r.at(x, y, c) - t.at(x, y, c));
    l1 /= 24 * 20 * 3;
    const double expected = (1 - lambda) * l1 + lambda * (1 - naive_ssim(r, t)) / 2;
    CHECK(res.value == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs(res.value - expected) <= 1e-5);

    std::uniform_int_distribution<int> px(0, 23), py(0, 19), pc(0, 2);
    for (int k = 0; k < 10; ++k) {
        const int x = px(rng), y = py(rng), c = pc(rng);
        const double h = 1e-6;
        ImageBuffer plus = r, minus = r;
        plus.at(x, y, c) += h;
        minus.at(x, y, c) -= h;
        const double fd = (photometric_loss(plus, t, lambda).value -
                           photometric_loss(minus, t, lambda).value) / (2 * h);
        const double an = res.grad.at(x, y, c);
        CAPTURE(x);
        CAPTURE(y);
        CHECK(std::abs(fd - an) <= 1e-4 * std::max(1e-6, std::abs(fd)) + 1e-10);
    }
}

TEST_CASE("adam_step examples")
{
    Scene scene;
    scene.splats.push_back(splat_with_logit(0.5f, -2.0f));
    scene.splats[0].position = Eigen::Vector3f(0.1f, 0.2f, 0.3f);
    const Scene before = scene;
    OptimState state(1, 0);
    RenderGradients zero(1);
    adam_step(scene, zero, state, LearningRates{});
    CHECK(scene.splats[0].position == before.splats[0].position);
    CHECK(scene.splats[0].rotation == before.splats[0].rotation);
    CHECK(scene.splats[0].opacity_logit == before.splats[0].opacity_logit);
    CHECK(state.step == 1);

    // Constant gradient 1 with lr 0.01: the bias-corrected first step is -lr.
    LearningRates lr;
    lr.position = lr.position_final = 0.01;
    RenderGradients g(1);
    g.splats[0].position.x() = 1.0;
    state = OptimState(1, 0);
    adam_step(scene, g, state, lr);
    CHECK(scene.splats[0].position.x() == doctest::Approx(0.1 - 0.01).epsilon(1e-6));
    CHECK(scene.splats[0].position.y() == before.splats[0].position.y());
    // Moments decay under a zero gradient.
    const double m0 = state.m[0];
    adam_step(scene, zero, state, lr);
    CHECK(state.m[0] == doctest::Approx(0.9 * m0));

    CHECK_THROWS_AS(adam_step(scene, RenderGradients(2), state, lr), ValidationError);
}

TEST_CASE("adam_step decreases a quadratic")
{
    Scene scene;
    scene.splats.push_back(GaussianSplat{});
    scene.splats[0].opacity_logit = 2.0f;
    OptimState state(1, 0);
    LearningRates lr;
    lr.opacity = 0.1;
    auto loss = [&] { return std::pow(scene.splats[0].opacity_logit - 0.5, 2); };
    double prev = loss();
    for (int i = 0; i < 2; ++i) {
        RenderGradients g(1);
        g.splats[0].opacity_logit = 2.0 * (scene.splats[0].opacity_logit - 0.5);
        adam_step(scene, g, state, lr);
        CHECK(loss() < prev);
        prev = loss();
    }
}

TEST_CASE("adam_step renormalizes quaternions")
{
    Scene scene;
    scene.splats.push_back(GaussianSplat{});
    OptimState state(1, 0);
    RenderGradients g(1);
    g.splats[0].rotation = Eigen::Vector4d(0.3, -1.0, 0.5, 2.0);
    LearningRates lr;
    lr.rotation = 0.2;
    adam_step(scene, g, state, lr);
    CHECK(scene.splats[0].rotation.norm() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("densify_and_prune examples")
{
    std::mt19937_64 rng(5);
    DensifyConfig config;

    // Quiet scene: nothing happens.
    Scene scene;
    for (int i = 0; i < 4; ++i) scene.splats.push_back(splat_with_logit(0.0f, -3.0f));
    OptimState state(scene.size(), 0);
    const Scene copy = scene;
    DensifyReport r = densify_and_prune(scene, state, config, rng);
    CHECK(r.cloned == 0);
    CHECK(r.split == 0);
    CHECK(r.pruned == 0);
    REQUIRE(scene.size() == copy.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        CHECK(scene.splats[i].position == copy.splats[i].position);
    }

    // Transparent splat is pruned.
    scene.splats.push_back(splat_with_logit(static_cast<float>(logit(0.001)), -3.0f));
    state = OptimState(scene.size(), 0);
    r = densify_and_prune(scene, state, config, rng);
    CHECK(r.pruned == 1);
    CHECK(scene.size() == 4);

    // Large splat over the gradient threshold is split with scale / 1.6.
    Scene big;
    big.splats.push_back(splat_with_logit(1.0f, std::log(0.3f)));
    OptimState bs(1, 0);
    bs.grad_accum[0] = 1e-3;
    bs.grad_count[0] = 1;
    r = densify_and_prune(big, bs, config, rng);
    CHECK(r.split == 1);
    REQUIRE(big.size() == 2);
    for (const auto& child : big.splats) {
        CHECK(std::exp(child.log_scale.x()) == doctest::Approx(0.3 / 1.6).epsilon(1e-6));
    }
    bs.require_size(2);

    // Small hot splat is cloned; the original keeps its moments, the clone starts at zero.
    Scene small;
    small.splats.push_back(splat_with_logit(1.0f, std::log(0.01f)));
    OptimState ss(1, 0);
    ss.grad_accum[0] = 1e-3;
    ss.grad_count[0] = 2;
    ss.m[0] = 0.25;
    r = densify_and_prune(small, ss, config, rng);
    CHECK(r.cloned == 1);
    REQUIRE(small.size() == 2);
    CHECK(ss.m[0] == 0.25);
    CHECK(ss.m[ss.stride()] == 0.0);
    CHECK(ss.grad_accum[1] == 0.0);
}

TEST_CASE("densify_and_prune conserves counts and enforces the prune rule")
{
    std::mt19937_64 rng(77);
    DensifyConfig config;
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        Scene scene = random_scene(rng, 60, trial % 2, 0.8, -5.5, -1.0);
        for (auto& s : scene.splats) s.opacity_logit = static_cast<float>(logit(0.001 + 0.02 * u(rng)));
        OptimState state(scene.size(), scene.sh_degree);
        for (std::size_t i = 0; i < scene.size(); ++i) {
            state.grad_count[i] = 1 + static_cast<int>(3 * u(rng));
            state.grad_accum[i] = state.grad_count[i] * 4e-4 * u(rng);
        }
        const std::size_t before = scene.size();
        const DensifyReport r = densify_and_prune(scene, state, config, rng);
        CHECK(scene.size() == before + r.cloned + r.split - r.pruned);
        state.require_size(scene.size());
        for (const auto& s : scene.splats) CHECK(sigmoid(s.opacity_logit) >= config.prune_opacity);
    }
}

TEST_CASE("reconstruct: zero steps returns the initialization")
{
    ReconConfig config;
    config.n_initial = 300;
    config.n_steps = 0;
    config.seed = 9;
    const Camera cam(0, 0, 2.5, 49, 16, 16);
    const std::vector<TrainingView> views{{cam, ImageBuffer(16, 16, 3, 0.5)}};
    const Scene out = reconstruct(views, config);
    std::mt19937_64 rng(9);
    const Scene init = initialize_scene(config, rng);
    REQUIRE(out.size() == 300);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out.splats[i].position == init.splats[i].position);
        CHECK(out.splats[i].log_scale == init.splats[i].log_scale);
        CHECK(sigmoid(out.splats[i].opacity_logit) == doctest::Approx(0.1));
        CHECK(out.splats[i].sh[0].isZero(0.0));
        CHECK(out.splats[i].position.cwiseAbs().maxCoeff() <= 1.0f);
    }
}

TEST_CASE("reconstruct: input validation")
{
    ReconConfig config;
    CHECK_THROWS_AS(reconstruct({}, config), ValidationError);
    config.n_steps = 10;
    config.densify_interval = 50;
    const Camera cam(0, 0, 2.5, 49, 16, 16);
    CHECK_THROWS_AS(reconstruct({{cam, ImageBuffer(16, 16, 3)}}, config), ValidationError);
    config.densify_interval = 5;
    CHECK_THROWS_AS(reconstruct({{cam, ImageBuffer(8, 16, 3)}}, config), ValidationError);
}

TEST_CASE("reconstruct: flat target converges")
{
    ReconConfig config;
    config.n_initial = 1000;
    config.n_steps = 200;
    config.seed = 1;
    std::vector<TrainingView> views;
    ImageBuffer target(32, 32, 3);
    for (std::size_t i = 0; i < target.pixel_count(); ++i) {
        target.data()[3 * i] = 0.2;
        target.data()[3 * i + 1] = 0.6;
        target.data()[3 * i + 2] = 0.8;
    }
    for (int k = 0; k < 4; ++k) views.push_back({Camera(90.0 * k, 0.0, 2.5, 49, 32, 32), target});
    std::size_t conserved_failures = 0;
    ReconObserver obs;
    obs.on_densify = [&](int, const DensifyReport& r, std::size_t before, std::size_t after) {
        if (after != before + r.cloned + r.split - r.pruned) ++conserved_failures;
    };
    const Scene scene = reconstruct(views, config, obs);
    CHECK(conserved_failures == 0);
    double err = 0.0;
    for (const auto& v : views) err += mean_abs_error(render(scene, v.camera), v.image);
    err /= views.size();
    MESSAGE("flat target mean error " << err);
    CHECK(err < 0.05);
}
