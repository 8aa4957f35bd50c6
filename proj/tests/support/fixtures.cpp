#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "gsedit/color.hpp"

namespace gsedit::testing {

Scene random_scene(std::mt19937_64& rng, int n, int sh_degree, double extent,
                   double min_log_scale, double max_log_scale)
{
    std::uniform_real_distribution<double> pos(-extent, extent);
    std::uniform_real_distribution<double> ls(min_log_scale, max_log_scale);
    std::uniform_real_distribution<double> op(0.2, 0.9);
    std::uniform_real_distribution<double> col(0.15, 0.85);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> rest(-0.1, 0.1);
    Scene scene;
    scene.sh_degree = sh_degree;
    for (int i = 0; i < n; ++i) {
        GaussianSplat s;
        s.position = Eigen::Vector3f(pos(rng), pos(rng), pos(rng));
        Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        s.rotation = q.normalized().cast<float>();
        s.log_scale = Eigen::Vector3f(ls(rng), ls(rng), ls(rng));
        s.opacity_logit = static_cast<float>(logit(op(rng)));
        s.sh[0] = rgb_to_sh_dc(Eigen::Vector3f(col(rng), col(rng), col(rng)));
        for (int k = 1; k < sh_coeff_count(sh_degree); ++k) {
            s.sh[k] = Eigen::Vector3f(rest(rng), rest(rng), rest(rng));
        }
        scene.splats.push_back(s);
    }
    return scene;
}

ImageBuffer brute_force_render(const Scene& scene, const Camera& camera,
                               const RasterSettings& settings)
{
    struct Flat {
        double depth;
        std::size_t index;
        Eigen::Vector2d mean;
        Eigen::Matrix2d inv_cov;
        double opacity;
        Eigen::Vector3d rgb;
    };
    std::vector<Flat> flat;
    const double f = camera.focal();
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const GaussianSplat& s = scene.splats[i];
        const Eigen::Vector3d t = camera.to_camera(s.position.cast<double>());
        if (!(t.z() > settings.near_plane)) {
            continue;
        }
        const Eigen::Matrix3d sigma = splat_covariance(s, settings.limits);
        // Jacobian of (f x / z, f y / z) at t.
        Eigen::Matrix<double, 2, 3> jac;
        jac << f / t.z(), 0, -f * t.x() / (t.z() * t.z()), 0, f / t.z(),
            -f * t.y() / (t.z() * t.z());
        Eigen::Matrix2d cov = jac * camera.rotation() * sigma * camera.rotation().transpose() *
                              jac.transpose();
        cov += settings.lowpass * Eigen::Matrix2d::Identity();
        const Eigen::Vector3d dir =
            (s.position.cast<double>() - camera.position()).normalized();
        const Eigen::Vector3d rgb = sh_to_rgb(
            std::span<const Eigen::Vector3f>(s.sh.data(), sh_coeff_count(scene.sh_degree)),
            scene.sh_degree, dir);
        flat.push_back({t.z(), i,
                        Eigen::Vector2d(f * t.x() / t.z() + camera.cx(),
                                        f * t.y() / t.z() + camera.cy()),
                        cov.inverse(), sigmoid(s.opacity_logit), rgb});
    }
    std::sort(flat.begin(), flat.end(), [](const Flat& a, const Flat& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
    });
    ImageBuffer img(camera.width(), camera.height(), 4);
    for (int y = 0; y < camera.height(); ++y) {
        for (int x = 0; x < camera.width(); ++x) {
            const Eigen::Vector2d pix(x + 0.5, y + 0.5);
            double t = 1.0;
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            for (const Flat& g : flat) {
                const Eigen::Vector2d d = pix - g.mean;
                const double power = -0.5 * d.dot(g.inv_cov * d);
                if (power > 0.0) {
                    continue;
                }
                const double a = std::min(settings.max_alpha, g.opacity * std::exp(power));
                if (a < settings.min_alpha) {
                    continue;
                }
                if (t * (1.0 - a) < settings.transmittance_floor) {
                    break;
                }
                c += a * t * g.rgb;
                t *= 1.0 - a;
            }
            for (int ch = 0; ch < 3; ++ch) {
                img.at(x, y, ch) = c[ch] + t * scene.background[ch];
            }
            img.at(x, y, 3) = 1.0 - t;
        }
    }
    return img;
}

ImageBuffer render_spheres(const std::vector<AnalyticSphere>& spheres, const Camera& camera,
                           int samples)
{
    ImageBuffer img(camera.width(), camera.height(), 4);
    const Eigen::Vector3d origin = camera.position();
    for (int y = 0; y < camera.height(); ++y) {
        for (int x = 0; x < camera.width(); ++x) {
            Eigen::Vector3d acc = Eigen::Vector3d::Zero();
            double coverage = 0.0;
            for (int sy = 0; sy < samples; ++sy) {
                for (int sx = 0; sx < samples; ++sx) {
                    const Eigen::Vector3d dir = camera.ray_direction(
                        x + (sx + 0.5) / samples, y + (sy + 0.5) / samples);
                    double best = std::numeric_limits<double>::infinity();
                    Eigen::Vector3d color = Eigen::Vector3d::Ones();
                    for (const auto& s : spheres) {
                        const Eigen::Vector3d oc = origin - s.center;
                        const double b = oc.dot(dir);
                        const double disc = b * b - (oc.squaredNorm() - s.radius * s.radius);
                        if (disc < 0.0) {
                            continue;
                        }
                        const double hit = -b - std::sqrt(disc);
                        if (hit > 0.0 && hit < best) {
                            best = hit;
                            color = s.color;
                        }
                    }
                    acc += color;
                    coverage += std::isfinite(best) ? 1.0 : 0.0;
                }
            }
            const double n = static_cast<double>(samples * samples);
            for (int c = 0; c < 3; ++c) {
                img.at(x, y, c) = acc[c] / n;
            }
            img.at(x, y, 3) = coverage / n;
        }
    }
    return img;
}

std::vector<AnalyticSphere> three_spheres()
{
    return {
        {Eigen::Vector3d(-0.45, -0.1, 0.1), 0.35, Eigen::Vector3d(0.85, 0.15, 0.1)},
        {Eigen::Vector3d(0.4, -0.15, -0.2), 0.3, Eigen::Vector3d(0.1, 0.7, 0.2)},
        {Eigen::Vector3d(0.0, 0.4, 0.15), 0.28, Eigen::Vector3d(0.15, 0.25, 0.85)},
    };
}

Scene gray_sphere_scene(std::mt19937_64& rng, int n, double radius)
{
    return ball_scene(rng, n, radius, [](const Eigen::Vector3d&) {
        return Eigen::Vector3d(0.5, 0.5, 0.5);
    });
}

Scene hemisphere_scene(std::mt19937_64& rng, int n, double radius)
{
    return ball_scene(rng, n, radius, [](const Eigen::Vector3d& p) {
        return p.y() >= 0.0 ? Eigen::Vector3d(0.9, 0.1, 0.1) : Eigen::Vector3d(0.1, 0.1, 0.9);
    });
}

double weighted_render_sum(const Scene& scene, const Camera& camera, const ImageBuffer& upstream,
                           const RasterSettings& settings)
{
    const ImageBuffer img = render(scene, camera, settings);
    double sum = 0.0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                sum += upstream.at(x, y, c) * img.at(x, y, c);
            }
        }
    }
    return sum;
}

ImageBuffer random_image(std::mt19937_64& rng, int width, int height, int channels, double lo,
                         double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    ImageBuffer img(width, height, channels);
    for (double& v : img.data()) {
        v = u(rng);
    }
    return img;
}

double silhouette_iou(const ImageBuffer& a, const ImageBuffer& b)
{
    std::size_t inter = 0, uni = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            const bool in_a = a.at(x, y, 3) > 0.5, in_b = b.at(x, y, 3) > 0.5;
            inter += in_a && in_b;
            uni += in_a || in_b;
        }
    }
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

double mean_foreground_hue(const ImageBuffer& rgba)
{
    double sx = 0.0, sy = 0.0;
    for (int y = 0; y < rgba.height(); ++y) {
        for (int x = 0; x < rgba.width(); ++x) {
            if (rgba.at(x, y, 3) <= 0.5) continue;
            const Eigen::Vector3d hsv =
                rgb_to_hsv({rgba.at(x, y, 0), rgba.at(x, y, 1), rgba.at(x, y, 2)});
            const double rad = hsv.x() * std::numbers::pi / 180.0;
            sx += hsv.y() * std::cos(rad);
            sy += hsv.y() * std::sin(rad);
        }
    }
    double deg = std::atan2(sy, sx) * 180.0 / std::numbers::pi;
    return deg < 0.0 ? deg + 360.0 : deg;
}

double mean_foreground_luminance(const ImageBuffer& rgba, int y0, int y1)
{
    double sum = 0.0;
    int n = 0;
    for (int y = std::max(0, y0); y < std::min(rgba.height(), y1); ++y) {
        for (int x = 0; x < rgba.width(); ++x) {
            if (rgba.at(x, y, 3) <= 0.5) continue;
            sum += luminance({rgba.at(x, y, 0), rgba.at(x, y, 1), rgba.at(x, y, 2)});
            ++n;
        }
    }
    return n ? sum / n : 0.0;
}

} // namespace gsedit::testing
