#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "gsedit/error.hpp"
#include "gsedit/mesh.hpp"

namespace gsedit {
namespace {

int dominant_direction(const Eigen::Vector3d& n)
{
    int axis = 0;
    n.cwiseAbs().maxCoeff(&axis);
    return 2 * axis + (n[axis] < 0.0 ? 1 : 0);
}

Eigen::Vector2d project(const Eigen::Vector3d& p, int direction)
{
    const int axis = direction / 2;
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    // Mirrored for the negative direction so every chart keeps counter-clockwise winding.
    return direction % 2 == 0 ? Eigen::Vector2d(p[u], p[v]) : Eigen::Vector2d(p[v], p[u]);
}

int find_root(std::vector<int>& parent, int x)
{
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

struct Island {
    std::vector<std::int32_t> faces;
    int direction = 0;
    double area = 0.0;
    Eigen::Vector2d lo{1e300, 1e300};
    Eigen::Vector2d hi{-1e300, -1e300};
    // Packed position in texels (top-left of the padded rectangle).
    int x = 0, y = 0, w = 0, h = 0;
};

void rect_size(Island& island, double scale, int gutter)
{
    const Eigen::Vector2d ext = (island.hi - island.lo) * scale;
    island.w = static_cast<int>(std::ceil(ext.x())) + 2 * gutter + 1;
    island.h = static_cast<int>(std::ceil(ext.y())) + 2 * gutter + 1;
}

/// Shelf packing by decreasing height. Returns false if the islands do not fit.
bool shelf_pack(std::vector<Island>& islands, const std::vector<std::size_t>& order, int size)
{
    int x = 0, y = 0, shelf = 0;
    for (std::size_t idx : order) {
        Island& is = islands[idx];
        if (is.w > size) return false;
        if (x + is.w > size) {
            y += shelf;
            x = 0;
            shelf = 0;
        }
        if (y + is.h > size) return false;
        is.x = x;
        is.y = y;
        x += is.w;
        shelf = std::max(shelf, is.h);
    }
    return true;
}

} // namespace

Mesh unwrap_uv(const Mesh& mesh, const AtlasSettings& settings)
{
    mesh.validate();
    if (settings.texture_size < 8 || settings.gutter < 0 || settings.max_charts < 1) {
        throw ValidationError("invalid atlas settings");
    }
    const std::size_t nf = mesh.faces.size();
    std::vector<int> direction(nf);
    for (std::size_t f = 0; f < nf; ++f) direction[f] = dominant_direction(face_normal(mesh, f));

    // Islands: edge-connected faces with the same direction.
    std::vector<int> parent(nf);
    std::iota(parent.begin(), parent.end(), 0);
    std::unordered_map<std::uint64_t, std::vector<std::int32_t>> edge_faces;
    for (std::size_t f = 0; f < nf; ++f) {
        for (int e = 0; e < 3; ++e) {
            std::int32_t a = mesh.faces[f][e], b = mesh.faces[f][(e + 1) % 3];
            if (a > b) std::swap(a, b);
            edge_faces[(static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b)].push_back(
                static_cast<std::int32_t>(f));
        }
    }
    for (const auto& [key, faces] : edge_faces) {
        for (std::size_t i = 1; i < faces.size(); ++i) {
            if (direction[faces[0]] == direction[faces[i]]) {
                parent[find_root(parent, faces[i])] = find_root(parent, faces[0]);
            }
        }
    }
    std::map<int, std::size_t> island_of_root;
    std::vector<Island> islands;
    for (std::size_t f = 0; f < nf; ++f) {
        const int r = find_root(parent, static_cast<int>(f));
        auto [it, inserted] = island_of_root.emplace(r, islands.size());
        if (inserted) {
            islands.emplace_back();
            islands.back().direction = direction[f];
        }
        Island& is = islands[it->second];
        is.faces.push_back(static_cast<std::int32_t>(f));
        is.area += face_area(mesh, f);
        for (std::int32_t v : mesh.faces[f]) {
            const Eigen::Vector2d p = project(mesh.vertices[v], is.direction);
            is.lo = is.lo.cwiseMin(p);
            is.hi = is.hi.cwiseMax(p);
        }
    }

    std::vector<std::size_t> by_area(islands.size());
    std::iota(by_area.begin(), by_area.end(), 0);
    std::stable_sort(by_area.begin(), by_area.end(),
                     [&](std::size_t a, std::size_t b) { return islands[a].area > islands[b].area; });

    // Largest texel density (texels per world unit) at which everything fits.
    const int size = settings.texture_size;
    double max_extent = 1e-12;
    for (const Island& is : islands) max_extent = std::max(max_extent, (is.hi - is.lo).maxCoeff());
    double lo = 0.0, hi = size / max_extent;
    auto fits = [&](double scale) {
        for (Island& is : islands) rect_size(is, scale, settings.gutter);
        std::vector<std::size_t> order(islands.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return islands[a].h > islands[b].h; });
        return shelf_pack(islands, order, size);
    };
    for (int iter = 0; iter < 40; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (fits(mid) ? lo : hi) = mid;
    }
    if (!islands.empty() && !fits(lo)) {
        throw ValidationError("unwrap_uv: charts do not fit into the texture; raise texture_size");
    }

    Mesh out;
    out.texture = mesh.texture;
    out.faces.resize(nf);
    out.face_chart.resize(nf);
    for (std::size_t rank = 0; rank < by_area.size(); ++rank) {
        const Island& is = islands[by_area[rank]];
        const int chart = static_cast<int>(std::min<std::size_t>(rank, settings.max_charts - 1));
        std::unordered_map<std::int32_t, std::int32_t> local;
        for (std::int32_t f : is.faces) {
            out.face_chart[f] = chart;
            for (int c = 0; c < 3; ++c) {
                const std::int32_t v = mesh.faces[f][c];
                auto [it, inserted] = local.emplace(v, static_cast<std::int32_t>(out.vertices.size()));
                if (inserted) {
                    const Eigen::Vector2d p = (project(mesh.vertices[v], is.direction) - is.lo) * lo;
                    const double tx = is.x + settings.gutter + 0.5 + p.x();
                    const double ty = is.y + settings.gutter + 0.5 + p.y();
                    out.vertices.push_back(mesh.vertices[v]);
                    out.uvs.emplace_back(tx / size, 1.0 - ty / size);
                    if (!mesh.colors.empty()) out.colors.push_back(mesh.colors[v]);
                }
                out.faces[f][c] = it->second;
            }
        }
    }
    return out;
}

std::vector<std::int32_t> texel_faces(const Mesh& mesh, int width, int height)
{
    if (!mesh.has_uvs()) throw ValidationError("texel_faces: mesh has no UVs");
    std::vector<std::int32_t> owner(static_cast<std::size_t>(width) * height, -1);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        std::array<Eigen::Vector2d, 3> t;
        for (int c = 0; c < 3; ++c) t[c] = uv_to_texel(mesh.uvs[mesh.faces[f][c]], width, height);
        const double area = (t[1] - t[0]).x() * (t[2] - t[0]).y() - (t[1] - t[0]).y() * (t[2] - t[0]).x();
        if (std::abs(area) < 1e-18) continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({t[0].x(), t[1].x(), t[2].x()}))));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({t[0].x(), t[1].x(), t[2].x()}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({t[0].y(), t[1].y(), t[2].y()}))));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({t[0].y(), t[1].y(), t[2].y()}))));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector2d p(x + 0.5, y + 0.5);
                bool inside = true;
                for (int e = 0; e < 3 && inside; ++e) {
                    const Eigen::Vector2d a = t[e], b = t[(e + 1) % 3];
                    const double cross = (b - a).x() * (p - a).y() - (b - a).y() * (p - a).x();
                    inside = cross * area >= -1e-12 * std::abs(area);
                }
                if (inside) owner[static_cast<std::size_t>(y) * width + x] = static_cast<std::int32_t>(f);
            }
        }
    }
    return owner;
}

} // namespace gsedit
