#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsedit/camera.hpp"
#include "gsedit/edit.hpp"
#include "gsedit/image.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

using Face = std::array<std::int32_t, 3>;

/// Indexed triangle mesh. `uvs`, `colors` and `texture` are optional: uvs and
/// colors are either empty or one entry per vertex. UV (0,0) is the bottom-left
/// corner of the texture image (row height-1).
struct Mesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<Face> faces;
    std::vector<Eigen::Vector2d> uvs;
    std::vector<Eigen::Vector3d> colors;
    /// Chart index per face, filled by unwrap_uv.
    std::vector<std::int32_t> face_chart;
    ImageBuffer texture;  // RGB

    bool empty() const { return faces.empty(); }
    bool has_uvs() const { return !uvs.empty(); }
    /// Throws ValidationError on out-of-range indices or mismatched attribute sizes.
    void validate() const;
};

double face_area(const Mesh& mesh, std::size_t face);
Eigen::Vector3d face_normal(const Mesh& mesh, std::size_t face);  // unit, zero if degenerate
double surface_area(const Mesh& mesh);

/// Label per face; faces sharing a vertex are connected.
std::vector<int> face_components(const Mesh& mesh, int* count = nullptr);

/// Number of undirected edges not shared by exactly two faces.
std::size_t open_edge_count(const Mesh& mesh);

/// Drops unreferenced vertices and reindexes faces (attributes follow their vertices).
void compact_vertices(Mesh& mesh);

// ---- density field --------------------------------------------------------

struct GridSettings {
    int blocks = 16;         // per axis
    int block_samples = 8;   // lattice points per block per axis
    double bound_scale = 1.1;
    ActivationLimits limits;

    int resolution() const { return blocks * block_samples; }
};

/// Block-pruned density lattice over the scene's bounding cube. Lattice point
/// (i, j, k) sits at the center of its cell: origin + (index + 0.5) * spacing.
class DensityGrid {
public:
    DensityGrid(const Scene& scene, const GridSettings& settings = {});

    const GridSettings& settings() const { return settings_; }
    int resolution() const { return settings_.resolution(); }
    const Eigen::Vector3d& origin() const { return origin_; }
    double spacing() const { return spacing_; }
    double block_width() const { return spacing_ * settings_.block_samples; }
    /// Largest 3-sigma radius over all splats; blocks include splats whose
    /// centers lie within this margin of the block.
    double margin() const { return margin_; }

    Eigen::Vector3d point(int i, int j, int k) const
    {
        return origin_ + spacing_ * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
    }
    /// Block containing x (clamped into the grid).
    std::array<int, 3> block_of(const Eigen::Vector3d& x) const;
    const std::vector<std::uint32_t>& block_splats(int bx, int by, int bz) const
    {
        return block_splats_[(static_cast<std::size_t>(bz) * settings_.blocks + by) * settings_.blocks + bx];
    }

    /// d(x) over the splats of block `block`.
    double query(const Eigen::Vector3d& x, const std::array<int, 3>& block) const;

    /// Samples every lattice point, one block per work item.
    void sample();
    bool sampled() const { return !values_.empty(); }
    double value(int i, int j, int k) const
    {
        const int n = resolution();
        return values_[(static_cast<std::size_t>(k) * n + j) * n + i];
    }
    const std::vector<double>& values() const { return values_; }

private:
    struct Kernel {
        Eigen::Vector3d center;
        Eigen::Matrix3d inv_cov;
        double opacity;
    };

    GridSettings settings_;
    Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
    double spacing_ = 1.0;
    double margin_ = 0.0;
    std::vector<Kernel> kernels_;
    std::vector<std::vector<std::uint32_t>> block_splats_;
    std::vector<double> values_;
};

/// Sum over all splats of alpha * exp(-1/2 (x - mu)^T Sigma^-1 (x - mu)), no pruning.
double global_density(const Scene& scene, const Eigen::Vector3d& x,
                      const ActivationLimits& limits = {});

/// d(x) for a point in `block` of a grid built over `scene`.
double query_density(const DensityGrid& grid, const Eigen::Vector3d& x, const std::array<int, 3>& block);

// ---- marching cubes -------------------------------------------------------

/// Triangles (as cube-edge indices, counter-clockwise seen from outside) for each
/// of the 256 corner configurations. Corner c sits at (c & 1, c >> 1 & 1, c >> 2 & 1);
/// a set bit means the corner is inside (value >= iso).
const std::vector<std::vector<std::array<int, 3>>>& marching_cubes_table();
/// Corner pair of each of the 12 cube edges.
const std::array<std::array<int, 2>, 12>& marching_cubes_edges();

struct SurfaceResult {
    Mesh mesh;
    bool empty = false;
    std::string warning;
};

/// Iso-surface of a sampled scalar lattice (n^3 values, x fastest) with lattice
/// point (i, j, k) at origin + (i, j, k) * spacing. Normals point toward lower values.
Mesh marching_cubes(const std::vector<double>& values, int n, const Eigen::Vector3d& origin,
                    double spacing, double iso);

/// Samples the block-pruned density and extracts the iso = threshold surface.
SurfaceResult extract_surface(const Scene& scene, double threshold, const GridSettings& grid = {});

// ---- post-processing ------------------------------------------------------

struct PostprocessSettings {
    std::size_t target_faces = 5000;
    double smoothing_lambda = 0.5;
    int smoothing_passes = 1;
    /// Components below this fraction of the total area are removed.
    double min_component_area = 1e-3;
};

/// Quadric-error edge collapses until faces <= target (or no valid collapse is left).
void decimate(Mesh& mesh, std::size_t target_faces);
/// One umbrella-operator pass per call: v += lambda * (mean(neighbors) - v).
void laplacian_smooth(Mesh& mesh, double lambda);
void remove_small_components(Mesh& mesh, double min_area_fraction);
/// Removes faces with area <= 1e-12 and repeated-vertex faces.
void remove_degenerate_faces(Mesh& mesh);

Mesh postprocess_mesh(Mesh mesh, const PostprocessSettings& settings = {});

// ---- UV atlas -------------------------------------------------------------

struct AtlasSettings {
    int texture_size = 1024;
    int gutter = 2;  // texels around every chart
    int max_charts = 64;
};

/// Planar-projection atlas. Faces are grouped by dominant normal axis and split into
/// edge-connected islands, each projected along its axis and shelf-packed. Seam
/// vertices are duplicated so every vertex has one UV. Islands beyond the
/// max_charts - 1 largest share the last chart label.
Mesh unwrap_uv(const Mesh& mesh, const AtlasSettings& settings = {});

/// Texel coordinates (x right, y down) of a UV for a size x size texture.
inline Eigen::Vector2d uv_to_texel(const Eigen::Vector2d& uv, int width, int height)
{
    return {uv.x() * width, (1.0 - uv.y()) * height};
}

/// Per-texel face index (-1 where no chart covers the texel center).
std::vector<std::int32_t> texel_faces(const Mesh& mesh, int width, int height);

// ---- mesh rasterization ---------------------------------------------------

struct MeshRaster {
    ImageBuffer image;                 // RGBA over the background; alpha is coverage
    ImageBuffer depth;                 // camera z, 0 where empty
    std::vector<std::int32_t> face;    // per pixel, -1 where empty
    std::vector<std::int32_t> texel;   // per pixel texel index into mesh.texture, -1 if none
};

/// Z-buffered rasterization at pixel centers with perspective-correct attributes.
/// Color comes from the texture (nearest texel) if the mesh has UVs and a texture,
/// else from vertex colors, else mid-gray. Unlit.
MeshRaster rasterize_mesh(const Mesh& mesh, const Camera& camera,
                          const Eigen::Vector3d& background = Eigen::Vector3d::Ones());

// ---- texturing ------------------------------------------------------------

struct BackprojectSettings {
    int texture_size = 1024;
    /// A texel is occluded in a view when it lies this far behind the depth proxy.
    double depth_tolerance = 0.08;
    /// Render pixels with less coverage are not used.
    double min_alpha = 0.5;
};

/// Texture (RGB, size x size) for a mesh with UVs from renders of `scene`.
/// Texels never seen take the color of the nearest seen texel.
ImageBuffer backproject_colors(const Mesh& mesh, const Scene& scene, const CameraRig& rig,
                               const BackprojectSettings& settings = {});

/// Produces I_fine from I_coarse. `coarse` is the RGBA mesh render.
class RefineOracle {
public:
    virtual ~RefineOracle() = default;
    virtual std::string name() const = 0;
    /// Returns an RGB(A) image of the same size. Throws OracleError on failure.
    virtual ImageBuffer refine(const ImageBuffer& coarse, double t_start, const std::string& prompt,
                               std::mt19937_64& rng) = 0;
};

/// Returns the coarse image unchanged.
class IdentityRefiner final : public RefineOracle {
public:
    std::string name() const override { return "identity"; }
    ImageBuffer refine(const ImageBuffer& coarse, double, const std::string&,
                       std::mt19937_64&) override
    {
        return coarse;
    }
};

/// Procedural stand-in for a denoiser: unsharp mask and color quantization of the
/// foreground, background untouched.
class SharpenRefiner final : public RefineOracle {
public:
    explicit SharpenRefiner(double amount = 0.5, int levels = 32) : amount_(amount), levels_(levels) {}
    std::string name() const override { return "sharpen"; }
    ImageBuffer refine(const ImageBuffer& coarse, double t_start, const std::string& prompt,
                       std::mt19937_64& rng) override;

private:
    double amount_;
    int levels_;
};

/// Multi-step deterministic denoising with an edit oracle: noise the encoded coarse
/// image to t_start, then walk t down to 0 in `steps` DDIM updates.
class DenoiseRefiner final : public RefineOracle {
public:
    DenoiseRefiner(EditOracle& oracle, const ImageCodec& codec, int steps = 4)
        : oracle_(oracle), codec_(codec), steps_(steps) {}
    std::string name() const override { return "denoise:" + oracle_.name(); }
    ImageBuffer refine(const ImageBuffer& coarse, double t_start, const std::string& prompt,
                       std::mt19937_64& rng) override;

private:
    EditOracle& oracle_;
    const ImageCodec& codec_;
    int steps_;
};

/// identity | sharpen | any builtin edit oracle name (wrapped in DenoiseRefiner with an
/// identity codec).
std::unique_ptr<RefineOracle> builtin_refiner(const std::string& name, const OracleParams& params = {});

struct RefineConfig {
    int n_steps = 100;
    double t_start = 0.5;
    /// Fraction of the per-texel mean residual removed per step.
    double learning_rate = 0.5;
    int max_oracle_failures = 3;
    std::uint64_t seed = 0;
};

struct RefineResult {
    Mesh mesh;
    int steps_run = 0;
    int oracle_failures = 0;
    std::vector<double> mse_history;
};

/// Texture refinement with a pixel MSE between the mesh render and the refined image.
/// Each step moves every visible texel by learning_rate times the mean of its pixel
/// residuals (the MSE gradient with a per-texel diagonal preconditioner).
RefineResult refine_texture(const Mesh& mesh, const CameraRig& rig, RefineOracle& oracle,
                            const std::string& prompt, const RefineConfig& config);

} // namespace gsedit
