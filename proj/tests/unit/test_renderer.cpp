#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "gsedit/error.hpp"
#include "gsedit/parallel.hpp"
#include "gsedit/renderer.hpp"

using namespace gsedit;
using namespace gsedit::testing;

namespace {

GaussianSplat solid_splat(const Eigen::Vector3f& pos, const Eigen::Vector3f& rgb, double opacity,
                          double scale)
{
    GaussianSplat s;
    s.position = pos;
    s.sh[0] = rgb_to_sh_dc(rgb);
    s.opacity_logit = static_cast<float>(logit(opacity));
    s.log_scale = Eigen::Vector3f::Constant(static_cast<float>(std::log(scale)));
    return s;
}

double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

} // namespace

TEST_CASE("project_splat examples")
{
    const Camera cam(0.0, 0.0, 2.5, 49.0, 128, 128);
    GaussianSplat s = solid_splat({0, 0, 0}, {1, 0, 0}, 0.9, 0.1);
    const auto p = project_splat(s, 0, cam);
    REQUIRE(p.has_value());
    CHECK(std::abs(p->mean.x() - 64.0) <= 0.5);
    CHECK(std::abs(p->mean.y() - 64.0) <= 0.5);
    CHECK(p->depth == doctest::Approx(2.5));

    // Similar triangles: std-dev in pixels = focal * 0.1 / depth.
    const double expected_sigma = cam.focal() * 0.1 / 2.5;
    const double var = expected_sigma * expected_sigma;
    CHECK(std::abs(p->cov(0, 0) - 0.3 - var) / var <= 0.02);
    CHECK(std::abs(p->cov(1, 1) - 0.3 - var) / var <= 0.02);
    CHECK(std::abs(p->cov(0, 1)) < 1e-9 * var);

    // Behind the camera (camera sits at z = -2.5 looking toward +z).
    s.position = Eigen::Vector3f(0, 0, -3.0f);
    CHECK_FALSE(project_splat(s, 0, cam).has_value());
    // Far off to the side: misses the viewport.
    s.position = Eigen::Vector3f(40.f, 0, 0);
    CHECK_FALSE(project_splat(s, 0, cam).has_value());
}

TEST_CASE("tile binning covers every 3-sigma footprint and is depth sorted")
{
    std::mt19937_64 rng(21);
    const Scene scene = random_scene(rng, 150, 0, 0.8, -3.0, -1.0);
    const Camera cam(30.0, 10.0, 2.5, 49.0, 64, 64);
    const RasterSettings settings;
    const ForwardPass fwd = rasterize(scene, cam, settings);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const auto& p = fwd.projected[i];
        if (!p) continue;
        const double r3 = 3.0 * std::sqrt(std::max(p->cov(0, 0), p->cov(1, 1)));
        for (int ty = 0; ty < fwd.binning.tiles_y; ++ty) {
            for (int tx = 0; tx < fwd.binning.tiles_x; ++tx) {
                // Tile rectangle vs 3-sigma circle bounding box.
                const double x0 = tx * kTileSize, x1 = x0 + kTileSize;
                const double y0 = ty * kTileSize, y1 = y0 + kTileSize;
                const bool hits = p->mean.x() + r3 >= x0 && p->mean.x() - r3 <= x1 &&
                                  p->mean.y() + r3 >= y0 && p->mean.y() - r3 <= y1 &&
                                  x1 > 0 && y1 > 0;
                if (!hits) continue;
                const auto& list = fwd.binning.tile(tx, ty);
                CHECK(std::find(list.begin(), list.end(), i) != list.end());
            }
        }
    }
    for (const auto& list : fwd.binning.lists) {
        for (std::size_t j = 1; j < list.size(); ++j) {
            const double a = fwd.projected[list[j - 1]]->depth;
            const double b = fwd.projected[list[j]]->depth;
            CHECK((a < b || (a == b && list[j - 1] < list[j])));
        }
    }
}

TEST_CASE("render examples")
{
    const Camera cam(0.0, 0.0, 2.5, 49.0, 32, 32);
    Scene empty;
    const ImageBuffer e = render(empty, cam);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            CHECK(e.at(x, y, 0) == 1.0);
            CHECK(e.at(x, y, 1) == 1.0);
            CHECK(e.at(x, y, 2) == 1.0);
            CHECK(e.at(x, y, 3) == 0.0);
        }
    }

    // One red splat on the axis: the center pixel matches the dense evaluation.
    Scene one;
    one.splats.push_back(solid_splat({0, 0, 0}, {1, 0, 0}, 0.95, 0.2));
    const ImageBuffer r = render(one, cam);
    const ImageBuffer dense = brute_force_render(one, cam);
    CHECK(max_abs_diff(r, dense) == 0.0);
    // Pixel 16 is centred half a pixel off the projected mean in x and y.
    const auto p1 = *project_splat(one.splats[0], 0, cam);
    const double d2 = 0.25 * (p1.conic[0] + 2 * p1.conic[1] + p1.conic[2]);
    const double alpha = r.at(16, 16, 3);
    CHECK(alpha == doctest::Approx(0.95 * std::exp(-0.5 * d2)).epsilon(1e-6));
    CHECK(alpha > 0.9);
    CHECK(r.at(16, 16, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.at(16, 16, 1) == doctest::Approx(1.0 - alpha).epsilon(1e-6));

    // Red in front of blue, compositing checked by hand at the shared center pixel.
    const Camera big(0.0, 0.0, 2.5, 49.0, 64, 64);
    Scene two;
    two.splats.push_back(solid_splat({0, 0, 0.5f}, {0, 0, 1}, 0.6, 0.3));   // farther
    two.splats.push_back(solid_splat({0, 0, -0.5f}, {1, 0, 0}, 0.5, 0.3));  // nearer
    const ImageBuffer img = render(two, big);
    // Pixel (32, 32) center sits at (32.5, 32.5): evaluate each footprint there.
    const auto pr = *project_splat(two.splats[1], 0, big);
    const auto pb = *project_splat(two.splats[0], 0, big);
    auto footprint = [](const ProjectedSplat& p, double u, double v) {
        const double dx = u - p.mean.x(), dy = v - p.mean.y();
        return p.opacity * std::exp(-0.5 * (p.conic[0] * dx * dx + p.conic[2] * dy * dy) -
                                    p.conic[1] * dx * dy);
    };
    const double ar = footprint(pr, 32.5, 32.5);
    const double ab = footprint(pb, 32.5, 32.5);
    const double t = (1 - ar) * (1 - ab);
    CHECK(img.at(32, 32, 0) == doctest::Approx(ar + t).epsilon(1e-5));
    CHECK(img.at(32, 32, 1) == doctest::Approx(t).epsilon(1e-5));
    CHECK(img.at(32, 32, 2) == doctest::Approx(ab * (1 - ar) + t).epsilon(1e-5));
}

TEST_CASE("tiled render equals brute force on random scenes")
{
    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int trial = 0; trial < 6; ++trial) {
        const Scene scene = random_scene(rng, 200, trial % 2, 0.8, -3.0, -1.2);
        const Camera cam(37.0 * trial, 20.0 - 8.0 * trial, 2.5, 49.0, 64, 64);
        worst = std::max(worst, max_abs_diff(render(scene, cam), brute_force_render(scene, cam)));
    }
    CHECK(worst <= 2e-3);
}

TEST_CASE("render output ranges and determinism across thread counts")
{
    std::mt19937_64 rng(4);
    const Scene scene = random_scene(rng, 120, 2);
    const Camera cam(10.0, 25.0, 2.5, 49.0, 48, 40);
    const ImageBuffer a = render(scene, cam);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.data()[i] >= 0.0);
        CHECK(a.data()[i] <= 1.0);
    }
    const int saved = thread_count();
    set_thread_count(1);
    const ImageBuffer single = render(scene, cam);
    const ImageBuffer up = random_image(rng, 48, 40, 3, -1, 1);
    const RenderGradients g1 = render_backward(scene, cam, up);
    set_thread_count(4);
    const ImageBuffer multi = render(scene, cam);
    const RenderGradients g4 = render_backward(scene, cam, up);
    set_thread_count(saved);
    CHECK(single.data() == multi.data());
    CHECK(single.data() == a.data());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        CHECK(g1.splats[i].position == g4.splats[i].position);
        CHECK(g1.splats[i].sh[0] == g4.splats[i].sh[0]);
        CHECK(g1.splats[i].rotation == g4.splats[i].rotation);
    }
}

TEST_CASE("render_backward: zero upstream gives exactly zero gradients")
{
    std::mt19937_64 rng(8);
    const Scene scene = random_scene(rng, 30, 1);
    const Camera cam(0.0, 0.0, 2.5, 49.0, 32, 32);
    const RenderGradients g = render_backward(scene, cam, ImageBuffer(32, 32, 3, 0.0));
    for (const auto& s : g.splats) {
        CHECK(s.position.isZero(0.0));
        CHECK(s.rotation.isZero(0.0));
        CHECK(s.log_scale.isZero(0.0));
        CHECK(s.opacity_logit == 0.0);
        for (const auto& c : s.sh) CHECK(c.isZero(0.0));
    }
    CHECK_THROWS_AS(render_backward(scene, cam, ImageBuffer(31, 32, 3)), ValidationError);
    ImageBuffer bad(32, 32, 3);
    bad.at(3, 3, 1) = NAN;
    CHECK_THROWS_AS(render_backward(scene, cam, bad), ValidationError);
}

TEST_CASE("render_backward: single splat, L = sum of red channel")
{
    const Camera cam(20.0, 10.0, 2.5, 49.0, 32, 32);
    Scene scene;
    GaussianSplat s = solid_splat({0.05f, -0.03f, 0.02f}, {0.6f, 0.3f, 0.4f}, 0.7, 0.15);
    s.rotation = Eigen::Vector4f(0.9f, 0.2f, -0.3f, 0.1f);
    s.log_scale = Eigen::Vector3f(std::log(0.2f), std::log(0.1f), std::log(0.15f));
    scene.splats.push_back(s);
    ImageBuffer upstream(32, 32, 3, 0.0);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) upstream.at(x, y, 0) = 1.0;
    const auto report = check_render_gradients(scene, cam, upstream, RasterSettings::smooth(), 1e-3);
    for (int g = 0; g < 5; ++g) {
        CAPTURE(g);
        CHECK(report[g].max_rel <= 1e-2);
    }
}

TEST_CASE("render_backward: directional derivative on a 20-splat scene")
{
    std::mt19937_64 rng(1234);
    const RasterSettings settings = RasterSettings::smooth();
    for (int trial = 0; trial < 5; ++trial) {
        const Scene scene = random_scene(rng, 20, trial % 4);
        const Camera cam(72.0 * trial, 15.0, 2.5, 49.0, 32, 32);
        const ImageBuffer upstream = random_image(rng, 32, 32, 3, -1, 1);
        const RenderGradients g = render_backward(scene, cam, upstream, settings);
        std::normal_distribution<double> n(0, 1);
        const int np = param_count(scene.sh_degree);
        Scene plus = scene, minus = scene;
        double predicted = 0.0;
        const double h = 1e-4;
        for (std::size_t i = 0; i < scene.size(); ++i) {
            for (int k = 0; k < np; ++k) {
                const double v = n(rng);
                float& p = param_ref(plus.splats[i], k);
                float& m = param_ref(minus.splats[i], k);
                p = static_cast<float>(p + h * v);
                m = static_cast<float>(m - h * v);
                predicted += grad_value(g.splats[i], k) * (static_cast<double>(p) - m);
            }
        }
        const double measured = weighted_render_sum(plus, cam, upstream, settings) -
                                weighted_render_sum(minus, cam, upstream, settings);
        CAPTURE(trial);
        CHECK(std::abs(measured - predicted) <= 0.01 * std::abs(measured));
    }
}

TEST_CASE("render_backward: finite differences on random scenes, all SH degrees")
{
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 8; ++trial) {
        const Scene scene = random_scene(rng, 6, trial % 4);
        const Camera cam(45.0 * trial, trial % 2 ? 30.0 : 0.0, 2.5, 49.0, 24, 24);
        const ImageBuffer upstream = random_image(rng, 24, 24, 3, -1, 1);
        const auto report = check_render_gradients(scene, cam, upstream, RasterSettings::smooth());
        for (int g = 0; g < 6; ++g) {
            CAPTURE(trial);
            CAPTURE(g);
            const double tol = (g >= 4) ? 1e-3 : 1e-2;
            CHECK(report[g].max_rel <= tol);
        }
    }
}

TEST_CASE("render_backward: gradient check holds over 100 seeds")
{
    int failures = 0;
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        const Scene scene = random_scene(rng, 1 + seed % 3, seed % 4);
        std::uniform_real_distribution<double> az(0, 360), el(-40, 40);
        const Camera cam(az(rng), el(rng), 2.5, 49.0, 24, 24);
        const ImageBuffer upstream = random_image(rng, 24, 24, 3, -1, 1);
        const auto report = check_render_gradients(scene, cam, upstream, RasterSettings::smooth());
        for (int g = 0; g < 6; ++g) {
            if (report[g].max_rel > 1e-2) {
                ++failures;
                MESSAGE("seed " << seed << " group " << g << " rel " << report[g].max_rel);
            }
        }
    }
    CHECK(failures == 0);
}
