#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "gsedit/error.hpp"
#include "gsedit/io.hpp"

namespace gsedit {
namespace {

void put_number(std::string& out, double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

double parse_number(const std::string& token, const std::string& where)
{
    double v = 0.0;
    const char* first = token.data();
    if (!token.empty() && token[0] == '+') ++first;
    const auto res = std::from_chars(first, token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size() || !std::isfinite(v)) {
        throw ValidationError(where + ": bad number '" + token + "'");
    }
    return v;
}

// 1-based or negative (relative) OBJ index to 0-based.
int resolve_index(const std::string& token, std::size_t count, const std::string& where)
{
    int idx = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), idx);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size() || idx == 0) {
        throw ValidationError(where + ": bad index '" + token + "'");
    }
    const long long r = idx > 0 ? idx - 1 : static_cast<long long>(count) + idx;
    if (r < 0 || r >= static_cast<long long>(count)) throw ValidationError(where + ": index " + token + " out of range");
    return static_cast<int>(r);
}

std::string rest_of_line(std::istringstream& ls)
{
    std::string s;
    std::getline(ls, s);
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// map_Kd of the first material that has one, relative to the MTL's directory.
std::filesystem::path find_texture(const std::filesystem::path& mtl)
{
    std::istringstream in(read_file(mtl));
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "map_Kd") {
            const std::string name = rest_of_line(ls);
            // Options such as "-s 1 1 1" are not supported; the file name is the last token.
            const auto sp = name.find_last_of(" \t");
            return mtl.parent_path() / (sp == std::string::npos ? name : name.substr(sp + 1));
        }
    }
    return {};
}

} // namespace

void save_obj(const Mesh& mesh, const std::filesystem::path& path)
{
    mesh.validate();
    const bool textured = mesh.has_uvs() && !mesh.texture.empty();
    const std::string stem = path.stem().string();
    std::string out = "# gsedit mesh\n";
    if (textured) out += "mtllib " + stem + ".mtl\nusemtl material0\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        out += "v";
        for (int k = 0; k < 3; ++k) {
            out += ' ';
            put_number(out, mesh.vertices[i][k]);
        }
        if (!textured && !mesh.colors.empty()) {
            for (int k = 0; k < 3; ++k) {
                out += ' ';
                put_number(out, mesh.colors[i][k]);
            }
        }
        out += '\n';
    }
    if (mesh.has_uvs()) {
        for (const auto& uv : mesh.uvs) {
            out += "vt ";
            put_number(out, uv.x());
            out += ' ';
            put_number(out, uv.y());
            out += '\n';
        }
    }
    for (const Face& f : mesh.faces) {
        out += 'f';
        for (int k = 0; k < 3; ++k) {
            const std::string idx = std::to_string(f[k] + 1);
            out += ' ' + idx;
            if (mesh.has_uvs()) out += '/' + idx;
        }
        out += '\n';
    }
    write_file(path, out);
    if (textured) {
        const auto dir = path.parent_path();
        write_file(dir / (stem + ".mtl"), "newmtl material0\nKa 1 1 1\nKd 1 1 1\nKs 0 0 0\nd 1\nillum 1\nmap_Kd " +
                                              stem + ".png\n");
        write_png(mesh.texture, dir / (stem + ".png"));
    }
}

Mesh load_obj(const std::filesystem::path& path)
{
    std::istringstream in(read_file(path));
    const std::string where = path.string();
    std::vector<Eigen::Vector3d> positions, colors;
    std::vector<Eigen::Vector2d> uvs;
    std::vector<std::filesystem::path> mtllibs;
    Mesh mesh;
    std::map<std::pair<int, int>, int> corner_vertex;
    bool any_uv_corner = false, any_plain_corner = false;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        const std::string at = where + ":" + std::to_string(line_no);
        if (kw == "v") {
            std::vector<double> vals;
            std::string tok;
            while (ls >> tok) vals.push_back(parse_number(tok, at));
            if (vals.size() != 3 && vals.size() != 4 && vals.size() != 6) throw ValidationError(at + ": bad vertex");
            positions.emplace_back(vals[0], vals[1], vals[2]);
            if (vals.size() == 6) colors.emplace_back(vals[3], vals[4], vals[5]);
        } else if (kw == "vt") {
            std::string u, v;
            if (!(ls >> u >> v)) throw ValidationError(at + ": bad texture coordinate");
            uvs.emplace_back(parse_number(u, at), parse_number(v, at));
        } else if (kw == "f") {
            std::vector<int> corners;
            std::string tok;
            while (ls >> tok) {
                const auto s1 = tok.find('/');
                const int vi = resolve_index(tok.substr(0, s1), positions.size(), at);
                int ti = -1;
                if (s1 != std::string::npos) {
                    const auto s2 = tok.find('/', s1 + 1);
                    const std::string t = tok.substr(s1 + 1, s2 == std::string::npos ? std::string::npos : s2 - s1 - 1);
                    if (!t.empty()) ti = resolve_index(t, uvs.size(), at);
                }
                (ti >= 0 ? any_uv_corner : any_plain_corner) = true;
                const auto key = std::make_pair(vi, ti);
                auto it = corner_vertex.find(key);
                if (it == corner_vertex.end()) {
                    it = corner_vertex.emplace(key, static_cast<int>(mesh.vertices.size())).first;
                    mesh.vertices.push_back(positions[vi]);
                    if (ti >= 0) mesh.uvs.push_back(uvs[ti]);
                    if (!colors.empty()) {
                        if (colors.size() != positions.size()) throw ValidationError(at + ": vertex colors on some vertices only");
                        mesh.colors.push_back(colors[vi]);
                    }
                }
                corners.push_back(it->second);
            }
            if (corners.size() < 3) throw ValidationError(at + ": face with fewer than 3 vertices");
            for (std::size_t k = 1; k + 1 < corners.size(); ++k) mesh.faces.push_back({corners[0], corners[k], corners[k + 1]});
        } else if (kw == "mtllib") {
            mtllibs.push_back(path.parent_path() / rest_of_line(ls));
        }
    }
    if (any_uv_corner && any_plain_corner) throw ValidationError(where + ": faces mix corners with and without UVs");
    if (mesh.faces.empty()) throw ValidationError(where + ": no faces");

    if (mesh.has_uvs()) {
        std::filesystem::path texture;
        for (const auto& lib : mtllibs) {
            texture = find_texture(lib);
            if (!texture.empty()) break;
        }
        if (texture.empty()) throw ValidationError(where + ": has UVs but no material texture (map_Kd)");
        if (!std::filesystem::exists(texture)) throw ValidationError("missing texture file " + texture.string());
        mesh.texture = read_png(texture).first_channels(3);
    }
    mesh.validate();
    return mesh;
}

void normalize_to_unit_sphere(Mesh& mesh)
{
    if (mesh.vertices.empty()) return;
    Eigen::Vector3d lo = mesh.vertices[0], hi = mesh.vertices[0];
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Eigen::Vector3d center = 0.5 * (lo + hi);
    double radius = 0.0;
    for (const auto& v : mesh.vertices) radius = std::max(radius, (v - center).norm());
    if (!(radius > 0.0)) throw ValidationError("mesh has zero extent");
    for (auto& v : mesh.vertices) v = (v - center) / radius;
}

std::vector<TrainingView> load_mesh_input(const std::filesystem::path& path, const CameraRig& rig)
{
    Mesh mesh = load_obj(path);
    if (!mesh.has_uvs() && mesh.colors.empty()) {
        throw ValidationError(path.string() + ": mesh needs a texture or vertex colors");
    }
    normalize_to_unit_sphere(mesh);
    std::vector<TrainingView> views;
    views.reserve(rig.size());
    for (const Camera& cam : rig) views.push_back({cam, rasterize_mesh(mesh, cam).image});
    return views;
}

} // namespace gsedit
