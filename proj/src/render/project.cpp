#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "gsedit/renderer.hpp"
#include "projection.hpp"

namespace gsedit {

namespace {

// Contributions below this are treated as zero when no cutoff is configured.
constexpr double kSmoothExtentAlpha = 1e-12;

struct Geometry {
    Eigen::Vector4d q_unit;
    double q_norm;
    Eigen::Vector3d scale;
    Eigen::Matrix3d rot;
    Eigen::Matrix3d cov3;
    Eigen::Vector3d t;  // camera space
};

Geometry splat_geometry(const GaussianSplat& splat, const Camera& camera,
                        const ActivationLimits& limits)
{
    Geometry g;
    const Eigen::Vector4d q = splat.rotation.cast<double>();
    g.q_norm = q.norm();
    g.q_unit = g.q_norm > 0.0 ? Eigen::Vector4d(q / g.q_norm) : Eigen::Vector4d(1, 0, 0, 0);
    g.scale = activate(splat, limits).scale;
    g.rot = rotation_matrix(g.q_unit);
    const Eigen::Matrix3d m = g.rot * g.scale.asDiagonal();
    g.cov3 = m * m.transpose();
    g.t = camera.to_camera(splat.position.cast<double>());
    return g;
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d& t, double f)
{
    Eigen::Matrix<double, 2, 3> j;
    const double iz = 1.0 / t.z();
    j << f * iz, 0.0, -f * t.x() * iz * iz,
         0.0, f * iz, -f * t.y() * iz * iz;
    return j;
}

} // namespace

RasterSettings RasterSettings::smooth()
{
    RasterSettings s;
    s.min_alpha = kSmoothExtentAlpha;
    s.transmittance_floor = 0.0;
    return s;
}

std::optional<ProjectedSplat> project_splat(const GaussianSplat& splat, int sh_degree,
                                            const Camera& camera, const RasterSettings& settings)
{
    const Geometry g = splat_geometry(splat, camera, settings.limits);
    if (!(g.t.z() > settings.near_plane)) {
        return std::nullopt;
    }
    const double f = camera.focal();
    const Eigen::Matrix<double, 2, 3> tw = projection_jacobian(g.t, f) * camera.rotation();
    Eigen::Matrix2d cov = tw * g.cov3 * tw.transpose();
    cov(0, 0) += settings.lowpass;
    cov(1, 1) += settings.lowpass;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
    if (!(det > 0.0)) {
        return std::nullopt;
    }

    ProjectedSplat p;
    p.mean = camera.project(g.t);
    p.cov = cov;
    p.conic = Eigen::Vector3d(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);
    p.depth = g.t.z();
    p.opacity = sigmoid(splat.opacity_logit);

    // Past this Mahalanobis radius alpha * G drops below the cutoff, so the
    // splat cannot contribute; never bin tighter than 3 sigma.
    const double cutoff = settings.min_alpha > 0.0 ? settings.min_alpha : kSmoothExtentAlpha;
    if (std::min(p.opacity, settings.max_alpha) < cutoff) {
        return std::nullopt;
    }
    const double k = std::max(3.0, std::sqrt(2.0 * std::log(p.opacity / cutoff)));
    const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    p.extent_px = k * std::sqrt(lambda_max) + 1.0;
    if (settings.min_alpha > 0.0) {
        p.min_power = std::log(settings.min_alpha / p.opacity) - 1e-9;
    }
    if (!std::isfinite(p.extent_px) || !p.mean.allFinite()) {
        return std::nullopt;
    }
    const double x0 = std::floor(p.mean.x() - p.extent_px - 0.5);
    const double x1 = std::ceil(p.mean.x() + p.extent_px - 0.5);
    const double y0 = std::floor(p.mean.y() - p.extent_px - 0.5);
    const double y1 = std::ceil(p.mean.y() + p.extent_px - 0.5);
    if (x1 < 0 || y1 < 0 || x0 > camera.width() - 1 || y0 > camera.height() - 1) {
        return std::nullopt;
    }
    p.bbox = {static_cast<int>(std::max(0.0, x0)), static_cast<int>(std::max(0.0, y0)),
              static_cast<int>(std::min<double>(camera.width() - 1, x1)),
              static_cast<int>(std::min<double>(camera.height() - 1, y1))};

    const int n = sh_coeff_count(sh_degree);
    double basis[kMaxShCoeffs];
    const Eigen::Vector3d dir = (splat.position.cast<double>() - camera.position()).normalized();
    sh_basis(sh_degree, dir, std::span<double>(basis, n));
    p.rgb_raw = Eigen::Vector3d::Constant(0.5);
    for (int i = 0; i < n; ++i) {
        p.rgb_raw += basis[i] * splat.sh[i].cast<double>();
    }
    p.rgb = p.rgb_raw.cwiseMax(0.0).cwiseMin(1.0);
    return p;
}

namespace detail {

void project_splat_backward(const GaussianSplat& splat, int sh_degree, const Camera& camera,
                            const RasterSettings& settings, const ProjectedSplat& projected,
                            const ProjectedGradient& grad, SplatGradient& out)
{
    const Geometry g = splat_geometry(splat, camera, settings.limits);
    const double f = camera.focal();
    const Eigen::Vector3d& t = g.t;
    const Eigen::Matrix3d& view = camera.rotation();

    // Color: rgb = clamp(0.5 + sum_k basis_k(dir) * sh_k).
    const int n = sh_coeff_count(sh_degree);
    Eigen::Vector3d d_raw = grad.rgb;
    for (int c = 0; c < 3; ++c) {
        if (projected.rgb_raw[c] <= 0.0 || projected.rgb_raw[c] >= 1.0) {
            d_raw[c] = 0.0;
        }
    }
    const Eigen::Vector3d offset = splat.position.cast<double>() - camera.position();
    const double offset_norm = offset.norm();
    const Eigen::Vector3d dir = offset / offset_norm;
    double basis[kMaxShCoeffs];
    double d_basis[kMaxShCoeffs];
    sh_basis(sh_degree, dir, std::span<double>(basis, n));
    for (int k = 0; k < n; ++k) {
        out.sh[k] = basis[k] * d_raw;
        d_basis[k] = splat.sh[k].cast<double>().dot(d_raw);
    }
    Eigen::Vector3d d_position = Eigen::Vector3d::Zero();
    if (sh_degree > 0) {
        const Eigen::Vector3d d_dir =
            sh_basis_backward(sh_degree, dir, std::span<const double>(d_basis, n));
        d_position += (d_dir - dir * dir.dot(d_dir)) / offset_norm;
    }

    // Opacity.
    out.opacity_logit = grad.opacity * projected.opacity * (1.0 - projected.opacity);

    // Conic -> 2D covariance: dL/dCov = -Q G Q with G the symmetric conic gradient.
    Eigen::Matrix2d q;
    q << projected.conic[0], projected.conic[1], projected.conic[1], projected.conic[2];
    Eigen::Matrix2d gq;
    gq << grad.conic[0], 0.5 * grad.conic[1], 0.5 * grad.conic[1], grad.conic[2];
    const Eigen::Matrix2d g_cov2 = -q * gq * q;

    // 2D covariance -> 3D covariance and the projection Jacobian.
    const Eigen::Matrix<double, 2, 3> jac = projection_jacobian(t, f);
    const Eigen::Matrix<double, 2, 3> tw = jac * view;
    const Eigen::Matrix3d g_cov3 = tw.transpose() * g_cov2 * tw;
    const Eigen::Matrix<double, 2, 3> g_tw = 2.0 * g_cov2 * tw * g.cov3;
    const Eigen::Matrix<double, 2, 3> g_jac = g_tw * view.transpose();

    const double iz = 1.0 / t.z();
    const double iz2 = iz * iz;
    const double iz3 = iz2 * iz;
    Eigen::Vector3d d_t;
    d_t.x() = g_jac(0, 2) * (-f * iz2) + grad.mean.x() * f * iz;
    d_t.y() = g_jac(1, 2) * (-f * iz2) + grad.mean.y() * f * iz;
    d_t.z() = g_jac(0, 0) * (-f * iz2) + g_jac(0, 2) * (2.0 * f * t.x() * iz3) +
              g_jac(1, 1) * (-f * iz2) + g_jac(1, 2) * (2.0 * f * t.y() * iz3) -
              grad.mean.x() * f * t.x() * iz2 - grad.mean.y() * f * t.y() * iz2;
    d_position += view.transpose() * d_t;
    out.position = d_position;

    // Sigma = M M^T with M = R diag(s).
    const Eigen::Matrix3d m = g.rot * g.scale.asDiagonal();
    const Eigen::Matrix3d g_m = 2.0 * g_cov3 * m;
    for (int j = 0; j < 3; ++j) {
        const double d_s = g.rot.col(j).dot(g_m.col(j));
        const double raw = std::exp(static_cast<double>(splat.log_scale[j]));
        const bool clamped = raw <= settings.limits.scale_floor || raw >= settings.limits.scale_ceiling;
        out.log_scale[j] = clamped ? 0.0 : d_s * g.scale[j];
    }
    const Eigen::Matrix3d g_r = g_m * g.scale.asDiagonal();

    const double w = g.q_unit[0], x = g.q_unit[1], y = g.q_unit[2], z = g.q_unit[3];
    Eigen::Vector4d d_q;
    d_q[0] = 2 * (-z * g_r(0, 1) + y * g_r(0, 2) + z * g_r(1, 0) - x * g_r(1, 2) - y * g_r(2, 0) +
                  x * g_r(2, 1));
    d_q[1] = 2 * (y * g_r(0, 1) + z * g_r(0, 2) + y * g_r(1, 0) - 2 * x * g_r(1, 1) -
                  w * g_r(1, 2) + z * g_r(2, 0) + w * g_r(2, 1) - 2 * x * g_r(2, 2));
    d_q[2] = 2 * (-2 * y * g_r(0, 0) + x * g_r(0, 1) + w * g_r(0, 2) + x * g_r(1, 0) +
                  z * g_r(1, 2) - w * g_r(2, 0) + z * g_r(2, 1) - 2 * y * g_r(2, 2));
    d_q[3] = 2 * (-2 * z * g_r(0, 0) - w * g_r(0, 1) + x * g_r(0, 2) + w * g_r(1, 0) -
                  2 * z * g_r(1, 1) + y * g_r(1, 2) + x * g_r(2, 0) + y * g_r(2, 1));
    out.rotation = (d_q - g.q_unit * g.q_unit.dot(d_q)) / g.q_norm;
}

} // namespace detail

} // namespace gsedit
