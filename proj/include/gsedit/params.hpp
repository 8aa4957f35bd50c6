#pragma once

#include "gsedit/renderer.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

enum class ParamGroup { position, rotation, scale, opacity, color_dc, color_rest };

/// Flat view of one splat's trainable scalars:
/// position(3) rotation(4) log_scale(3) opacity(1) sh(3 * coeffs, coefficient-major).
inline int param_count(int sh_degree) { return 11 + 3 * sh_coeff_count(sh_degree); }

inline ParamGroup param_group(int k)
{
    if (k < 3) return ParamGroup::position;
    if (k < 7) return ParamGroup::rotation;
    if (k < 10) return ParamGroup::scale;
    if (k < 11) return ParamGroup::opacity;
    return k < 14 ? ParamGroup::color_dc : ParamGroup::color_rest;
}

inline float& param_ref(GaussianSplat& s, int k)
{
    if (k < 3) return s.position[k];
    if (k < 7) return s.rotation[k - 3];
    if (k < 10) return s.log_scale[k - 7];
    if (k == 10) return s.opacity_logit;
    return s.sh[(k - 11) / 3][(k - 11) % 3];
}

inline float param_value(const GaussianSplat& s, int k)
{
    return param_ref(const_cast<GaussianSplat&>(s), k);
}

inline double grad_value(const SplatGradient& g, int k)
{
    if (k < 3) return g.position[k];
    if (k < 7) return g.rotation[k - 3];
    if (k < 10) return g.log_scale[k - 7];
    if (k == 10) return g.opacity_logit;
    return g.sh[(k - 11) / 3][(k - 11) % 3];
}

} // namespace gsedit
