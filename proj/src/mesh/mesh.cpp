#include <algorithm>
#include <cstdint>
#include <numeric>
#include <unordered_map>

#include <Eigen/Geometry>

#include "gsedit/error.hpp"
#include "gsedit/mesh.hpp"

namespace gsedit {
namespace {

int find_root(std::vector<int>& parent, int x)
{
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

std::uint64_t edge_key(std::int32_t a, std::int32_t b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

} // namespace

void Mesh::validate() const
{
    const auto n = static_cast<std::int64_t>(vertices.size());
    for (const Face& f : faces) {
        for (std::int32_t v : f) {
            if (v < 0 || v >= n) throw ValidationError("mesh face index out of range");
        }
    }
    if (!uvs.empty() && uvs.size() != vertices.size()) {
        throw ValidationError("mesh uv count must match vertex count");
    }
    if (!colors.empty() && colors.size() != vertices.size()) {
        throw ValidationError("mesh color count must match vertex count");
    }
    if (!face_chart.empty() && face_chart.size() != faces.size()) {
        throw ValidationError("mesh chart labels must match face count");
    }
    if (!texture.empty() && texture.channels() < 3) {
        throw ValidationError("mesh texture needs three channels");
    }
}

double face_area(const Mesh& mesh, std::size_t face)
{
    const Face& f = mesh.faces[face];
    const Eigen::Vector3d e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Eigen::Vector3d e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    return 0.5 * e1.cross(e2).norm();
}

Eigen::Vector3d face_normal(const Mesh& mesh, std::size_t face)
{
    const Face& f = mesh.faces[face];
    const Eigen::Vector3d n =
        (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    const double len = n.norm();
    return len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::Zero();
}

double surface_area(const Mesh& mesh)
{
    double a = 0.0;
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) a += face_area(mesh, i);
    return a;
}

std::vector<int> face_components(const Mesh& mesh, int* count)
{
    std::vector<int> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (const Face& f : mesh.faces) {
        const int r0 = find_root(parent, f[0]);
        parent[find_root(parent, f[1])] = r0;
        parent[find_root(parent, f[2])] = r0;
    }
    std::vector<int> label_of_root(mesh.vertices.size(), -1);
    std::vector<int> labels(mesh.faces.size());
    int next = 0;
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const int r = find_root(parent, mesh.faces[i][0]);
        if (label_of_root[r] < 0) label_of_root[r] = next++;
        labels[i] = label_of_root[r];
    }
    if (count) *count = next;
    return labels;
}

std::size_t open_edge_count(const Mesh& mesh)
{
    std::unordered_map<std::uint64_t, int> uses;
    uses.reserve(mesh.faces.size() * 2);
    for (const Face& f : mesh.faces) {
        for (int e = 0; e < 3; ++e) ++uses[edge_key(f[e], f[(e + 1) % 3])];
    }
    return static_cast<std::size_t>(
        std::count_if(uses.begin(), uses.end(), [](const auto& kv) { return kv.second != 2; }));
}

void compact_vertices(Mesh& mesh)
{
    std::vector<std::int32_t> remap(mesh.vertices.size(), -1);
    std::int32_t next = 0;
    for (Face& f : mesh.faces) {
        for (std::int32_t& v : f) {
            if (remap[v] < 0) remap[v] = next++;
            v = remap[v];
        }
    }
    auto shrink = [&](auto& attr) {
        if (attr.empty()) return;
        std::remove_reference_t<decltype(attr)> out(next);
        for (std::size_t i = 0; i < remap.size(); ++i) {
            if (remap[i] >= 0) out[remap[i]] = attr[i];
        }
        attr = std::move(out);
    };
    shrink(mesh.vertices);
    shrink(mesh.uvs);
    shrink(mesh.colors);
}

} // namespace gsedit
