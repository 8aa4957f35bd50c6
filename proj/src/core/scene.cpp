#include "gsedit/scene.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "gsedit/error.hpp"

namespace gsedit {

double sigmoid(double x)
{
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Activated activate(const GaussianSplat& splat, const ActivationLimits& limits)
{
    Activated out;
    out.opacity = sigmoid(splat.opacity_logit);
    for (int i = 0; i < 3; ++i) {
        out.scale[i] = std::clamp(std::exp(static_cast<double>(splat.log_scale[i])),
                                  limits.scale_floor, limits.scale_ceiling);
    }
    return out;
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q)
{
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Eigen::Matrix3d covariance_from_rotation_scale(const Eigen::Vector4d& q, const Eigen::Vector3d& s)
{
    if (!q.allFinite() || !s.allFinite()) {
        throw ValidationError("covariance_from_rotation_scale: non-finite input");
    }
    const Eigen::Matrix3d m = rotation_matrix(q) * s.asDiagonal();
    return m * m.transpose();
}

Eigen::Matrix3d splat_covariance(const GaussianSplat& splat, const ActivationLimits& limits)
{
    const Eigen::Vector4d q = splat.rotation.cast<double>().normalized();
    return covariance_from_rotation_scale(q, activate(splat, limits).scale);
}

double eval_gaussian(const GaussianSplat& splat, const Eigen::Vector3d& x,
                     const ActivationLimits& limits)
{
    if (!x.allFinite()) {
        throw ValidationError("eval_gaussian: non-finite query point");
    }
    // Sigma^-1 = R S^-2 R^T, so the quadratic form is |S^-1 R^T d|^2.
    const Eigen::Vector4d q = splat.rotation.cast<double>().normalized();
    const Eigen::Vector3d s = activate(splat, limits).scale;
    const Eigen::Vector3d d = x - splat.position.cast<double>();
    const Eigen::Vector3d local = rotation_matrix(q).transpose() * d;
    const double m2 = (local.array() / s.array()).square().sum();
    return std::exp(-0.5 * m2);
}

Eigen::Vector3f rgb_to_sh_dc(const Eigen::Vector3f& rgb)
{
    return ((rgb.array() - 0.5f) / static_cast<float>(kShC0)).matrix();
}

} // namespace gsedit
