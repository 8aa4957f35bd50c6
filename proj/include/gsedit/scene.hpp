#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gsedit {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = (kMaxShDegree + 1) * (kMaxShDegree + 1);

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One anisotropic 3D Gaussian. Parameters are stored unconstrained:
/// scale in log space, opacity as a logit, rotation as a (w, x, y, z)
/// quaternion that the optimizer renormalizes after every step.
struct GaussianSplat {
    Eigen::Vector3f position = Eigen::Vector3f::Zero();
    Eigen::Vector4f rotation = Eigen::Vector4f(1.f, 0.f, 0.f, 0.f);
    Eigen::Vector3f log_scale = Eigen::Vector3f::Zero();
    float opacity_logit = 0.f;
    /// sh[k] holds the RGB coefficients of basis function k. Only the first
    /// sh_coeff_count(scene.sh_degree) entries are meaningful.
    std::array<Eigen::Vector3f, kMaxShCoeffs> sh{};

    GaussianSplat() { sh.fill(Eigen::Vector3f::Zero()); }
};

struct Scene {
    std::vector<GaussianSplat> splats;
    int sh_degree = 0;
    Eigen::Vector3f background = Eigen::Vector3f::Ones();

    std::size_t size() const { return splats.size(); }
    bool empty() const { return splats.empty(); }
};

/// Activated scales are clamped into [scale_floor, scale_ceiling].
struct ActivationLimits {
    double scale_floor = 1e-6;
    double scale_ceiling = 10.0;
};

struct Activated {
    double opacity;
    Eigen::Vector3d scale;
};

double sigmoid(double x);
double logit(double p);

Activated activate(const GaussianSplat& splat, const ActivationLimits& limits = {});

/// Rotation matrix of a unit (w, x, y, z) quaternion.
Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q);

/// Sigma = R S S^T R^T. Rejects non-finite input.
Eigen::Matrix3d covariance_from_rotation_scale(const Eigen::Vector4d& q, const Eigen::Vector3d& s);

/// Covariance of a stored splat (normalized rotation, activated scale).
Eigen::Matrix3d splat_covariance(const GaussianSplat& splat, const ActivationLimits& limits = {});

/// exp(-1/2 (x - mu)^T Sigma^-1 (x - mu)); ignores opacity.
double eval_gaussian(const GaussianSplat& splat, const Eigen::Vector3d& x,
                     const ActivationLimits& limits = {});

/// Degree-0 SH basis constant.
inline constexpr double kShC0 = 0.28209479177387814;

/// Evaluates the real SH expansion along `dir` (unit), adds 0.5 and clamps to [0,1].
/// `coeffs` must hold exactly sh_coeff_count(degree) entries.
Eigen::Vector3d sh_to_rgb(std::span<const Eigen::Vector3f> coeffs, int degree,
                          const Eigen::Vector3d& dir);

/// Real SH basis values for `dir`; fills sh_coeff_count(degree) entries of `out`.
void sh_basis(int degree, const Eigen::Vector3d& dir, std::span<double> out);

/// Gradient of the basis values w.r.t. the (unnormalized-independent) direction
/// components: out_grad_dir += sum_k dL/dbasis_k * dbasis_k/ddir.
Eigen::Vector3d sh_basis_backward(int degree, const Eigen::Vector3d& dir,
                                  std::span<const double> dl_dbasis);

/// RGB value for degree-0 coefficient; inverse of the kShC0 * dc + 0.5 map.
Eigen::Vector3f rgb_to_sh_dc(const Eigen::Vector3f& rgb);

} // namespace gsedit
