#include <algorithm>
#include <cmath>
#include <limits>

#include "gsedit/error.hpp"
#include "gsedit/mesh.hpp"

namespace gsedit {
namespace {

constexpr double kNear = 1e-3;

} // namespace

MeshRaster rasterize_mesh(const Mesh& mesh, const Camera& camera, const Eigen::Vector3d& background)
{
    mesh.validate();
    const int w = camera.width();
    const int h = camera.height();
    const bool textured = mesh.has_uvs() && !mesh.texture.empty();
    const int tw = textured ? mesh.texture.width() : 0;
    const int th = textured ? mesh.texture.height() : 0;

    std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
    std::vector<Eigen::Vector2d> screen(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        cam[v] = camera.to_camera(mesh.vertices[v]);
        if (cam[v].z() > kNear) screen[v] = camera.project(cam[v]);
    }

    std::vector<double> zbuf(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
    std::vector<std::int32_t> face_of(static_cast<std::size_t>(w) * h, -1);
    std::vector<Eigen::Vector3d> bary(static_cast<std::size_t>(w) * h);

    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& face = mesh.faces[f];
        if (cam[face[0]].z() <= kNear || cam[face[1]].z() <= kNear || cam[face[2]].z() <= kNear) continue;
        const Eigen::Vector2d& a = screen[face[0]];
        const Eigen::Vector2d& b = screen[face[1]];
        const Eigen::Vector2d& c = screen[face[2]];
        const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        if (std::abs(area) < 1e-14) continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5)));
        const Eigen::Vector3d inv_z(1.0 / cam[face[0]].z(), 1.0 / cam[face[1]].z(), 1.0 / cam[face[2]].z());
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector2d p(x + 0.5, y + 0.5);
                const double l0 = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
                const double l1 = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
                const double l2 = 1.0 - l0 - l1;
                if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
                const Eigen::Vector3d ls(l0, l1, l2);
                const double iz = ls.dot(inv_z);
                const double z = 1.0 / iz;
                const std::size_t pix = static_cast<std::size_t>(y) * w + x;
                if (z >= zbuf[pix]) continue;
                zbuf[pix] = z;
                face_of[pix] = static_cast<std::int32_t>(f);
                bary[pix] = ls.cwiseProduct(inv_z) / iz;
            }
        }
    }

    MeshRaster out;
    out.image = ImageBuffer(w, h, 4);
    out.depth = ImageBuffer(w, h, 1);
    out.face = face_of;
    out.texel.assign(face_of.size(), -1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            const std::int32_t f = face_of[pix];
            Eigen::Vector3d rgb = background;
            if (f >= 0) {
                const Face& face = mesh.faces[f];
                const Eigen::Vector3d& l = bary[pix];
                if (textured) {
                    const Eigen::Vector2d uv = l[0] * mesh.uvs[face[0]] + l[1] * mesh.uvs[face[1]] + l[2] * mesh.uvs[face[2]];
                    const Eigen::Vector2d t = uv_to_texel(uv, tw, th);
                    const int tx = std::clamp(static_cast<int>(std::floor(t.x())), 0, tw - 1);
                    const int ty = std::clamp(static_cast<int>(std::floor(t.y())), 0, th - 1);
                    out.texel[pix] = ty * tw + tx;
                    for (int ch = 0; ch < 3; ++ch) rgb[ch] = mesh.texture.at(tx, ty, ch);
                } else if (!mesh.colors.empty()) {
                    rgb = l[0] * mesh.colors[face[0]] + l[1] * mesh.colors[face[1]] + l[2] * mesh.colors[face[2]];
                } else {
                    rgb = Eigen::Vector3d::Constant(0.5);
                }
                out.depth.at(x, y, 0) = zbuf[pix];
            }
            for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = rgb[ch];
            out.image.at(x, y, 3) = f >= 0 ? 1.0 : 0.0;
        }
    }
    return out;
}

} // namespace gsedit
