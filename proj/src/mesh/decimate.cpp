#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>

#include <Eigen/Dense>

#include "gsedit/error.hpp"
#include "gsedit/mesh.hpp"

namespace gsedit {
namespace {

using Quadric = Eigen::Matrix4d;

Quadric plane_quadric(const Eigen::Vector3d& n, const Eigen::Vector3d& p, double weight)
{
    const Eigen::Vector4d plane(n.x(), n.y(), n.z(), -n.dot(p));
    return weight * plane * plane.transpose();
}

double quadric_error(const Quadric& q, const Eigen::Vector3d& p)
{
    const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
    return h.dot(q * h);
}

std::uint64_t edge_key(std::int32_t a, std::int32_t b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

struct Candidate {
    double cost;
    std::int32_t u, v;
    std::uint32_t version_u, version_v;
    Eigen::Vector3d target;
    bool operator>(const Candidate& o) const { return cost > o.cost; }
};

class Decimator {
public:
    explicit Decimator(Mesh& mesh) : mesh_(mesh)
    {
        const std::size_t nv = mesh.vertices.size();
        quadric_.assign(nv, Quadric::Zero());
        incident_.assign(nv, {});
        version_.assign(nv, 0);
        vertex_alive_.assign(nv, true);
        face_alive_.assign(mesh.faces.size(), true);
        alive_faces_ = mesh.faces.size();

        std::unordered_map<std::uint64_t, int> edge_uses;
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const Face& face = mesh.faces[f];
            const Eigen::Vector3d n = face_normal(mesh, f);
            const double area = face_area(mesh, f);
            for (std::int32_t v : face) {
                incident_[v].push_back(static_cast<std::int32_t>(f));
                quadric_[v] += plane_quadric(n, mesh.vertices[face[0]], area);
            }
            for (int e = 0; e < 3; ++e) ++edge_uses[edge_key(face[e], face[(e + 1) % 3])];
        }
        // Boundary edges get a stiff perpendicular plane so open borders keep their shape.
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const Face& face = mesh.faces[f];
            for (int e = 0; e < 3; ++e) {
                const std::int32_t a = face[e], b = face[(e + 1) % 3];
                if (edge_uses[edge_key(a, b)] != 1) continue;
                const Eigen::Vector3d dir = mesh.vertices[b] - mesh.vertices[a];
                const Eigen::Vector3d side = dir.cross(face_normal(mesh, f));
                if (side.norm() <= 0.0) continue;
                const Quadric q = plane_quadric(side.normalized(), mesh.vertices[a], 100.0 * dir.squaredNorm());
                quadric_[a] += q;
                quadric_[b] += q;
            }
        }
        for (const auto& [key, uses] : edge_uses) {
            push(static_cast<std::int32_t>(key >> 32), static_cast<std::int32_t>(key & 0xffffffffu));
        }
    }

    void run(std::size_t target)
    {
        while (alive_faces_ > target && !heap_.empty()) {
            const Candidate c = heap_.top();
            heap_.pop();
            if (!vertex_alive_[c.u] || !vertex_alive_[c.v]) continue;
            if (version_[c.u] != c.version_u || version_[c.v] != c.version_v) continue;
            collapse(c);
        }
        std::vector<Face> faces;
        for (std::size_t f = 0; f < mesh_.faces.size(); ++f) {
            if (face_alive_[f]) faces.push_back(mesh_.faces[f]);
        }
        mesh_.faces = std::move(faces);
        mesh_.uvs.clear();
        mesh_.face_chart.clear();
        compact_vertices(mesh_);
    }

private:
    std::vector<std::int32_t> neighbors(std::int32_t v) const
    {
        std::vector<std::int32_t> out;
        for (std::int32_t f : incident_[v]) {
            if (!face_alive_[f]) continue;
            for (std::int32_t w : mesh_.faces[f]) {
                if (w != v) out.push_back(w);
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    void push(std::int32_t u, std::int32_t v)
    {
        const Quadric q = quadric_[u] + quadric_[v];
        Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
        const Eigen::Vector3d b = -q.topRightCorner<3, 1>();
        const Eigen::Vector3d& pu = mesh_.vertices[u];
        const Eigen::Vector3d& pv = mesh_.vertices[v];
        Eigen::Vector3d best = 0.5 * (pu + pv);
        double cost = quadric_error(q, best);
        const Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
        const double scale = a.cwiseAbs().maxCoeff();
        if (scale > 0.0 && lu.rank() == 3 && std::abs(a.determinant()) > 1e-12 * scale * scale * scale) {
            const Eigen::Vector3d opt = lu.solve(b);
            // Keep the optimum near the edge; far solutions come from near-singular quadrics.
            if ((opt - best).norm() <= 2.0 * (pu - pv).norm()) {
                const double e = quadric_error(q, opt);
                if (e < cost) {
                    best = opt;
                    cost = e;
                }
            }
        }
        for (const Eigen::Vector3d& p : {pu, pv}) {
            const double e = quadric_error(q, p);
            if (e < cost) {
                best = p;
                cost = e;
            }
        }
        heap_.push({std::max(cost, 0.0), u, v, version_[u], version_[v], best});
    }

    bool collapse_is_valid(const Candidate& c, const std::vector<std::int32_t>& shared) const
    {
        // Link condition: the common neighbors are exactly the apexes of the shared faces.
        std::vector<std::int32_t> apexes;
        for (std::int32_t f : shared) {
            for (std::int32_t w : mesh_.faces[f]) {
                if (w != c.u && w != c.v) apexes.push_back(w);
            }
        }
        std::sort(apexes.begin(), apexes.end());
        const auto nu = neighbors(c.u);
        const auto nv = neighbors(c.v);
        std::vector<std::int32_t> common;
        std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
        if (common != apexes) return false;

        for (std::int32_t end : {c.u, c.v}) {
            for (std::int32_t f : incident_[end]) {
                if (!face_alive_[f] || std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
                std::array<Eigen::Vector3d, 3> p;
                for (int i = 0; i < 3; ++i) p[i] = mesh_.vertices[mesh_.faces[f][i]];
                const Eigen::Vector3d before = (p[1] - p[0]).cross(p[2] - p[0]);
                for (int i = 0; i < 3; ++i) {
                    if (mesh_.faces[f][i] == c.u || mesh_.faces[f][i] == c.v) p[i] = c.target;
                }
                const Eigen::Vector3d after = (p[1] - p[0]).cross(p[2] - p[0]);
                if (after.norm() <= 2e-12) return false;
                if (before.dot(after) < 0.2 * before.norm() * after.norm()) return false;
            }
        }
        return true;
    }

    void collapse(const Candidate& c)
    {
        std::vector<std::int32_t> shared;
        for (std::int32_t f : incident_[c.u]) {
            if (!face_alive_[f]) continue;
            const Face& face = mesh_.faces[f];
            if (std::find(face.begin(), face.end(), c.v) != face.end()) shared.push_back(f);
        }
        if (shared.empty() || !collapse_is_valid(c, shared)) return;

        for (std::int32_t f : shared) {
            face_alive_[f] = false;
            --alive_faces_;
        }
        for (std::int32_t f : incident_[c.v]) {
            if (!face_alive_[f]) continue;
            for (std::int32_t& w : mesh_.faces[f]) {
                if (w == c.v) w = c.u;
            }
            incident_[c.u].push_back(f);
        }
        incident_[c.v].clear();
        vertex_alive_[c.v] = false;
        mesh_.vertices[c.u] = c.target;
        if (!mesh_.colors.empty()) mesh_.colors[c.u] = 0.5 * (mesh_.colors[c.u] + mesh_.colors[c.v]);
        quadric_[c.u] += quadric_[c.v];
        ++version_[c.u];
        auto& inc = incident_[c.u];
        inc.erase(std::remove_if(inc.begin(), inc.end(), [&](std::int32_t f) { return !face_alive_[f]; }),
                  inc.end());
        for (std::int32_t w : neighbors(c.u)) push(c.u, w);
    }

    Mesh& mesh_;
    std::vector<Quadric> quadric_;
    std::vector<std::vector<std::int32_t>> incident_;
    std::vector<std::uint32_t> version_;
    std::vector<bool> vertex_alive_;
    std::vector<bool> face_alive_;
    std::size_t alive_faces_ = 0;
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap_;
};

} // namespace

void decimate(Mesh& mesh, std::size_t target_faces)
{
    mesh.validate();
    if (mesh.faces.size() <= target_faces) return;
    Decimator(mesh).run(target_faces);
}

void laplacian_smooth(Mesh& mesh, double lambda)
{
    const std::size_t nv = mesh.vertices.size();
    std::vector<Eigen::Vector3d> sum(nv, Eigen::Vector3d::Zero());
    std::vector<int> count(nv, 0);
    std::unordered_map<std::uint64_t, bool> seen;
    for (const Face& f : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            const std::int32_t a = f[e], b = f[(e + 1) % 3];
            if (!seen.emplace(edge_key(a, b), true).second) continue;
            sum[a] += mesh.vertices[b];
            sum[b] += mesh.vertices[a];
            ++count[a];
            ++count[b];
        }
    }
    for (std::size_t v = 0; v < nv; ++v) {
        if (count[v] > 0) mesh.vertices[v] += lambda * (sum[v] / count[v] - mesh.vertices[v]);
    }
}

void remove_small_components(Mesh& mesh, double min_area_fraction)
{
    int count = 0;
    const std::vector<int> label = face_components(mesh, &count);
    std::vector<double> area(count, 0.0);
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const double a = face_area(mesh, f);
        area[label[f]] += a;
        total += a;
    }
    std::vector<Face> kept;
    std::vector<std::int32_t> kept_chart;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        if (area[label[f]] < min_area_fraction * total) continue;
        kept.push_back(mesh.faces[f]);
        if (!mesh.face_chart.empty()) kept_chart.push_back(mesh.face_chart[f]);
    }
    mesh.faces = std::move(kept);
    mesh.face_chart = std::move(kept_chart);
    compact_vertices(mesh);
}

void remove_degenerate_faces(Mesh& mesh)
{
    std::vector<Face> kept;
    std::vector<std::int32_t> kept_chart;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& face = mesh.faces[f];
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) continue;
        if (face_area(mesh, f) <= 1e-12) continue;
        kept.push_back(face);
        if (!mesh.face_chart.empty()) kept_chart.push_back(mesh.face_chart[f]);
    }
    mesh.faces = std::move(kept);
    mesh.face_chart = std::move(kept_chart);
    compact_vertices(mesh);
}

Mesh postprocess_mesh(Mesh mesh, const PostprocessSettings& settings)
{
    mesh.validate();
    if (!(settings.smoothing_lambda >= 0.0 && settings.smoothing_lambda <= 1.0)) {
        throw ValidationError("smoothing lambda must lie in [0, 1]");
    }
    decimate(mesh, settings.target_faces);
    for (int i = 0; i < settings.smoothing_passes; ++i) laplacian_smooth(mesh, settings.smoothing_lambda);
    remove_small_components(mesh, settings.min_component_area);
    remove_degenerate_faces(mesh);
    return mesh;
}

} // namespace gsedit
