#include <algorithm>

#include "gsedit/error.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

} // namespace

void sh_basis(int degree, const Eigen::Vector3d& dir, std::span<double> out)
{
    out[0] = kShC0;
    if (degree < 1) {
        return;
    }
    const double x = dir.x(), y = dir.y(), z = dir.z();
    out[1] = -kC1 * y;
    out[2] = kC1 * z;
    out[3] = -kC1 * x;
    if (degree < 2) {
        return;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    out[4] = kC2[0] * x * y;
    out[5] = kC2[1] * y * z;
    out[6] = kC2[2] * (2 * zz - xx - yy);
    out[7] = kC2[3] * x * z;
    out[8] = kC2[4] * (xx - yy);
    if (degree < 3) {
        return;
    }
    out[9] = kC3[0] * y * (3 * xx - yy);
    out[10] = kC3[1] * x * y * z;
    out[11] = kC3[2] * y * (4 * zz - xx - yy);
    out[12] = kC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    out[13] = kC3[4] * x * (4 * zz - xx - yy);
    out[14] = kC3[5] * z * (xx - yy);
    out[15] = kC3[6] * x * (xx - 3 * yy);
}

Eigen::Vector3d sh_basis_backward(int degree, const Eigen::Vector3d& dir,
                                  std::span<const double> g)
{
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    if (degree < 1) {
        return d;
    }
    const double x = dir.x(), y = dir.y(), z = dir.z();
    d.x() += -kC1 * g[3];
    d.y() += -kC1 * g[1];
    d.z() += kC1 * g[2];
    if (degree < 2) {
        return d;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    d.x() += kC2[0] * y * g[4] + kC2[2] * (-2 * x) * g[6] + kC2[3] * z * g[7] +
             kC2[4] * 2 * x * g[8];
    d.y() += kC2[0] * x * g[4] + kC2[1] * z * g[5] + kC2[2] * (-2 * y) * g[6] +
             kC2[4] * (-2 * y) * g[8];
    d.z() += kC2[1] * y * g[5] + kC2[2] * 4 * z * g[6] + kC2[3] * x * g[7];
    if (degree < 3) {
        return d;
    }
    d.x() += kC3[0] * y * 6 * x * g[9] + kC3[1] * y * z * g[10] + kC3[2] * y * (-2 * x) * g[11] +
             kC3[3] * z * (-6 * x) * g[12] + kC3[4] * (4 * zz - 3 * xx - yy) * g[13] +
             kC3[5] * z * 2 * x * g[14] + kC3[6] * (3 * xx - 3 * yy) * g[15];
    d.y() += kC3[0] * (3 * xx - 3 * yy) * g[9] + kC3[1] * x * z * g[10] +
             kC3[2] * (4 * zz - xx - 3 * yy) * g[11] + kC3[3] * z * (-6 * y) * g[12] +
             kC3[4] * x * (-2 * y) * g[13] + kC3[5] * z * (-2 * y) * g[14] +
             kC3[6] * x * (-6 * y) * g[15];
    d.z() += kC3[1] * x * y * g[10] + kC3[2] * y * 8 * z * g[11] +
             kC3[3] * (6 * zz - 3 * xx - 3 * yy) * g[12] + kC3[4] * x * 8 * z * g[13] +
             kC3[5] * (xx - yy) * g[14];
    return d;
}

Eigen::Vector3d sh_to_rgb(std::span<const Eigen::Vector3f> coeffs, int degree,
                          const Eigen::Vector3d& dir)
{
    if (degree < 0 || degree > kMaxShDegree) {
        throw ValidationError("sh_to_rgb: degree must be in [0, 3]");
    }
    const int n = sh_coeff_count(degree);
    if (static_cast<int>(coeffs.size()) != n) {
        throw ValidationError("sh_to_rgb: expected " + std::to_string(n) + " coefficients, got " +
                              std::to_string(coeffs.size()));
    }
    double basis[kMaxShCoeffs];
    sh_basis(degree, dir, std::span<double>(basis, n));
    Eigen::Vector3d rgb = Eigen::Vector3d::Constant(0.5);
    for (int k = 0; k < n; ++k) {
        rgb += basis[k] * coeffs[k].cast<double>();
    }
    return rgb.cwiseMax(0.0).cwiseMin(1.0);
}

} // namespace gsedit
