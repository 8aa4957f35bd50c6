#include <cmath>
#include <vector>

#include "gsedit/error.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit {
namespace {

using Plane = std::vector<double>;

std::vector<double> gaussian_kernel(const SsimSettings& s)
{
    std::vector<double> k(s.window);
    const int half = s.window / 2;
    double sum = 0.0;
    for (int i = 0; i < s.window; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * s.sigma * s.sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable "same" correlation with zero padding. The kernel is symmetric, so
// this operator is its own adjoint.
Plane blur(const Plane& in, int w, int h, const std::vector<double>& k)
{
    const int half = static_cast<int>(k.size()) / 2;
    Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i) {
                const int xx = x + i;
                if (xx >= 0 && xx < w) acc += k[i + half] * in[y * w + xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i) {
                const int yy = y + i;
                if (yy >= 0 && yy < h) acc += k[i + half] * tmp[yy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    return out;
}

Plane channel(const ImageBuffer& img, int c)
{
    Plane p(img.pixel_count());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data()[i * img.channels() + c];
    return p;
}

void check_pair(const ImageBuffer& a, const ImageBuffer& b)
{
    if (a.width() != b.width() || a.height() != b.height()) {
        throw ValidationError("loss: image dimensions differ");
    }
    if (a.channels() < 3 || b.channels() < 3) {
        throw ValidationError("loss: images need at least three channels");
    }
}

// Mean SSIM of one channel; when `grad` is non-null, adds d(mean SSIM)/dx * scale.
double ssim_channel(const Plane& x, const Plane& y, int w, int h, const SsimSettings& s,
                    const std::vector<double>& k, Plane* grad, double scale)
{
    const std::size_t n = x.size();
    Plane xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const Plane mx = blur(x, w, h, k), my = blur(y, w, h, k);
    const Plane exx = blur(xx, w, h, k), eyy = blur(yy, w, h, k), exy = blur(xy, w, h, k);

    double total = 0.0;
    Plane d_mx, d_exx, d_exy;
    if (grad) {
        d_mx.assign(n, 0.0);
        d_exx.assign(n, 0.0);
        d_exy.assign(n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double vx = exx[i] - mx[i] * mx[i];
        const double vy = eyy[i] - my[i] * my[i];
        const double cxy = exy[i] - mx[i] * my[i];
        const double a1 = 2.0 * mx[i] * my[i] + s.c1;
        const double a2 = 2.0 * cxy + s.c2;
        const double b1 = mx[i] * mx[i] + my[i] * my[i] + s.c1;
        const double b2 = vx + vy + s.c2;
        const double value = a1 * a2 / (b1 * b2);
        total += value;
        if (grad) {
            d_mx[i] = 2.0 * my[i] * (a2 - a1) / (b1 * b2) - 2.0 * mx[i] * value / b1 +
                      2.0 * mx[i] * value / b2;
            d_exx[i] = -value / b2;
            d_exy[i] = 2.0 * a1 / (b1 * b2);
        }
    }
    if (grad) {
        const Plane g_mx = blur(d_mx, w, h, k);
        const Plane g_exx = blur(d_exx, w, h, k);
        const Plane g_exy = blur(d_exy, w, h, k);
        const double norm = scale / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            (*grad)[i] += norm * (g_mx[i] + 2.0 * x[i] * g_exx[i] + y[i] * g_exy[i]);
        }
    }
    return total / static_cast<double>(n);
}

} // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimSettings& settings)
{
    check_pair(a, b);
    const auto k = gaussian_kernel(settings);
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        sum += ssim_channel(channel(a, c), channel(b, c), a.width(), a.height(), settings, k,
                            nullptr, 0.0);
    }
    return sum / 3.0;
}

LossResult photometric_loss(const ImageBuffer& render, const ImageBuffer& target, double lambda,
                            const SsimSettings& settings)
{
    check_pair(render, target);
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ValidationError("loss: lambda must lie in [0, 1]");
    }
    const int w = render.width(), h = render.height();
    const std::size_t n = render.pixel_count();
    const double count = 3.0 * static_cast<double>(n);

    LossResult out;
    out.grad = ImageBuffer(w, h, 3, 0.0);
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const double d = render.data()[i * render.channels() + c] -
                             target.data()[i * target.channels() + c];
            l1 += std::abs(d);
            const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            out.grad.data()[i * 3 + c] = (1.0 - lambda) * sign / count;
        }
    }
    out.l1 = l1 / count;

    double ssim_sum = 0.0;
    if (lambda > 0.0) {
        const auto k = gaussian_kernel(settings);
        // d/dx of lambda * (1 - mean_c S_c) / 2
        const double scale = -lambda / (2.0 * 3.0);
        for (int c = 0; c < 3; ++c) {
            const Plane x = channel(render, c), y = channel(target, c);
            // Identical channels sit at the SSIM maximum; skip the rounding-noise gradient.
            Plane g(n, 0.0);
            ssim_sum += ssim_channel(x, y, w, h, settings, k, x == y ? nullptr : &g, scale);
            for (std::size_t i = 0; i < n; ++i) out.grad.data()[i * 3 + c] += g[i];
        }
        out.ssim = ssim_sum / 3.0;
    } else {
        out.ssim = ssim(render, target, settings);
    }
    out.value = (1.0 - lambda) * out.l1 + lambda * (1.0 - out.ssim) / 2.0;
    return out;
}

} // namespace gsedit
