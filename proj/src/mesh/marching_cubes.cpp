#include <algorithm>
#include <cmath>

#include "gsedit/error.hpp"
#include "gsedit/mesh.hpp"

namespace gsedit {
namespace {

// The table is built from face rules rather than typed in. On every cube face the
// crossings are walked counter-clockwise around the outward normal and each
// outside->inside crossing is joined to the next crossing; on ambiguous faces this
// cuts around each inside corner. Neighboring cubes see the same face with opposite
// orientation, so they produce the same segments reversed and the surface closes.

std::array<std::array<int, 2>, 12> build_edges()
{
    std::array<std::array<int, 2>, 12> edges{};
    int e = 0;
    for (int axis = 0; axis < 3; ++axis) {
        const int bit = 1 << axis;
        for (int c = 0; c < 8; ++c) {
            if (!(c & bit)) edges[e++] = {c, c | bit};
        }
    }
    return edges;
}

int edge_index(const std::array<std::array<int, 2>, 12>& edges, int a, int b)
{
    for (int e = 0; e < 12; ++e) {
        if ((edges[e][0] == a && edges[e][1] == b) || (edges[e][0] == b && edges[e][1] == a)) return e;
    }
    return -1;
}

std::vector<std::vector<std::array<int, 3>>> build_table()
{
    const auto edges = build_edges();
    // Corners of each face, counter-clockwise around its outward normal.
    std::vector<std::array<int, 4>> faces;
    for (int axis = 0; axis < 3; ++axis) {
        const int u = (axis + 1) % 3;
        const int v = (axis + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            auto corner = [&](int cu, int cv) { return (side << axis) | (cu << u) | (cv << v); };
            if (side == 1) {
                faces.push_back({corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)});
            } else {
                faces.push_back({corner(0, 0), corner(0, 1), corner(1, 1), corner(1, 0)});
            }
        }
    }

    std::array<int, 12> edge_face_mask{};
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (int i = 0; i < 4; ++i) edge_face_mask[edge_index(edges, faces[f][i], faces[f][(i + 1) % 4])] |= 1 << f;
    }

    std::vector<std::vector<std::array<int, 3>>> table(256);
    for (int config = 0; config < 256; ++config) {
        auto inside = [&](int c) { return (config >> c) & 1; };
        std::array<int, 12> next{};
        next.fill(-1);
        for (const auto& q : faces) {
            std::vector<std::pair<int, bool>> crossings;  // (edge, is_entry)
            for (int i = 0; i < 4; ++i) {
                const int a = q[i];
                const int b = q[(i + 1) % 4];
                if (inside(a) != inside(b)) crossings.push_back({edge_index(edges, a, b), inside(b) == 1});
            }
            for (std::size_t i = 0; i < crossings.size(); ++i) {
                if (crossings[i].second) next[crossings[i].first] = crossings[(i + 1) % crossings.size()].first;
            }
        }
        std::array<bool, 12> used{};
        for (int start = 0; start < 12; ++start) {
            if (next[start] < 0 || used[start]) continue;
            std::vector<int> loop;
            for (int e = start; !used[e]; e = next[e]) {
                used[e] = true;
                loop.push_back(e);
            }
            // Fan apex whose chords never join two vertices of one cube face: the
            // neighboring cube could emit the same chord and the edge would gain four faces.
            const std::size_t n = loop.size();
            std::size_t apex = 0;
            for (std::size_t r = 0; r < n; ++r) {
                bool ok = true;
                for (std::size_t i = 2; i + 1 < n; ++i) {
                    if (edge_face_mask[loop[r]] & edge_face_mask[loop[(r + i) % n]]) ok = false;
                }
                if (ok) {
                    apex = r;
                    break;
                }
            }
            for (std::size_t i = 1; i + 1 < n; ++i) {
                table[config].push_back({loop[apex], loop[(apex + i) % n], loop[(apex + i + 1) % n]});
            }
        }
    }
    return table;
}

} // namespace

const std::array<std::array<int, 2>, 12>& marching_cubes_edges()
{
    static const auto edges = build_edges();
    return edges;
}

const std::vector<std::vector<std::array<int, 3>>>& marching_cubes_table()
{
    static const auto table = build_table();
    return table;
}

Mesh marching_cubes(const std::vector<double>& values, int n, const Eigen::Vector3d& origin,
                    double spacing, double iso)
{
    if (n < 2 || values.size() != static_cast<std::size_t>(n) * n * n) {
        throw ValidationError("marching_cubes: lattice size mismatch");
    }
    const auto& table = marching_cubes_table();
    const auto& edges = marching_cubes_edges();
    auto at = [&](int i, int j, int k) { return values[(static_cast<std::size_t>(k) * n + j) * n + i]; };

    Mesh mesh;
    // Vertex per lattice edge: ((k * n + j) * n + i) * 3 + axis.
    std::vector<std::int32_t> edge_vertex(static_cast<std::size_t>(n) * n * n * 3, -1);
    auto vertex_on = [&](int i, int j, int k, int cube_edge) {
        const int ca = edges[cube_edge][0];
        const int cb = edges[cube_edge][1];
        const int axis = (ca ^ cb) == 1 ? 0 : ((ca ^ cb) == 2 ? 1 : 2);
        const int ai = i + (ca & 1), aj = j + ((ca >> 1) & 1), ak = k + ((ca >> 2) & 1);
        std::int32_t& slot = edge_vertex[((static_cast<std::size_t>(ak) * n + aj) * n + ai) * 3 + axis];
        if (slot < 0) {
            const double va = at(ai, aj, ak);
            const double vb = at(ai + (axis == 0), aj + (axis == 1), ak + (axis == 2));
            const double t = std::clamp((iso - va) / (vb - va), 0.0, 1.0);
            Eigen::Vector3d p = origin + spacing * Eigen::Vector3d(ai, aj, ak);
            p[axis] += t * spacing;
            slot = static_cast<std::int32_t>(mesh.vertices.size());
            mesh.vertices.push_back(p);
        }
        return slot;
    };

    for (int k = 0; k + 1 < n; ++k) {
        for (int j = 0; j + 1 < n; ++j) {
            for (int i = 0; i + 1 < n; ++i) {
                int config = 0;
                for (int c = 0; c < 8; ++c) {
                    if (at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) >= iso) config |= 1 << c;
                }
                for (const auto& tri : table[config]) {
                    mesh.faces.push_back({vertex_on(i, j, k, tri[0]), vertex_on(i, j, k, tri[1]),
                                          vertex_on(i, j, k, tri[2])});
                }
            }
        }
    }
    return mesh;
}

SurfaceResult extract_surface(const Scene& scene, double threshold, const GridSettings& settings)
{
    if (!(threshold > 0.0)) throw ValidationError("extract_surface: threshold must be positive");
    DensityGrid grid(scene, settings);
    grid.sample();
    SurfaceResult result;
    const Eigen::Vector3d first = grid.point(0, 0, 0);
    result.mesh = marching_cubes(grid.values(), grid.resolution(), first, grid.spacing(), threshold);
    if (result.mesh.empty()) {
        result.empty = true;
        result.warning = "iso-surface is empty: threshold exceeds the peak density";
    }
    return result;
}

} // namespace gsedit
