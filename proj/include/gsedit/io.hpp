#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gsedit/camera.hpp"
#include "gsedit/image.hpp"
#include "gsedit/mesh.hpp"
#include "gsedit/optimizer.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

// ---- splat PLY ------------------------------------------------------------
//
// Binary little-endian, one `vertex` element. Written as float32 in the order
// x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3 (normals are zero).
// f_rest is channel-major: all red higher-order coefficients, then green, then blue.
// On read, any numeric property type is accepted, properties may come in any order,
// unknown properties and elements are ignored, and missing f_rest means degree 0.

std::string encode_scene_ply(const Scene& scene);
/// Throws ParseError on a malformed header or truncated body ("missing property rot_3"),
/// ValidationError on non-finite values.
Scene decode_scene_ply(std::string_view bytes);

void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

// ---- PNG ------------------------------------------------------------------

/// 8-bit PNG from a 1, 3 or 4 channel image; values are clamped to [0,1] and rounded.
void write_png(const ImageBuffer& image, const std::filesystem::path& path);
/// RGB, or RGBA if the file has an alpha channel; values in [0,1].
ImageBuffer read_png(const std::filesystem::path& path);

// ---- OBJ / MTL ------------------------------------------------------------

/// Writes `path` (OBJ), and if the mesh has UVs and a texture, `<stem>.mtl` and
/// `<stem>.png` beside it. Vertex colors without a texture are written as `v x y z r g b`.
void save_obj(const Mesh& mesh, const std::filesystem::path& path);

/// Triangulates polygons and splits vertices with several UVs. Reads the map_Kd
/// texture of the first material that has one. Throws ValidationError if the file or
/// a referenced texture cannot be read.
Mesh load_obj(const std::filesystem::path& path);

/// Centers the bounding box at the origin and scales the farthest vertex to radius 1.
void normalize_to_unit_sphere(Mesh& mesh);

/// Ground-truth views of a textured or vertex-colored OBJ: normalized, then rasterized
/// on a white background from every rig camera. Images are RGBA.
std::vector<TrainingView> load_mesh_input(const std::filesystem::path& path, const CameraRig& rig);

/// Whole file as bytes. Throws ValidationError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace gsedit
