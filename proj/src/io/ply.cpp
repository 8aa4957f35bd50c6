#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "gsedit/error.hpp"
#include "gsedit/io.hpp"

namespace gsedit {
namespace {

static_assert(std::endian::native == std::endian::little, "PLY codec assumes a little-endian host");

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> parse_type(const std::string& s)
{
    static const std::map<std::string, PlyType> kTypes{
        {"char", PlyType::i8},    {"int8", PlyType::i8},     {"uchar", PlyType::u8},
        {"uint8", PlyType::u8},   {"short", PlyType::i16},   {"int16", PlyType::i16},
        {"ushort", PlyType::u16}, {"uint16", PlyType::u16},  {"int", PlyType::i32},
        {"int32", PlyType::i32},  {"uint", PlyType::u32},    {"uint32", PlyType::u32},
        {"float", PlyType::f32},  {"float32", PlyType::f32}, {"double", PlyType::f64},
        {"float64", PlyType::f64}};
    const auto it = kTypes.find(s);
    if (it == kTypes.end()) return std::nullopt;
    return it->second;
}

std::size_t type_size(PlyType t)
{
    switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
    }
    return 0;
}

template <typename T>
T load_as(const char* p)
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

// float32 values come back unchanged, so float files round-trip bit-exactly.
float read_value(const char* p, PlyType t)
{
    switch (t) {
    case PlyType::i8: return static_cast<float>(load_as<std::int8_t>(p));
    case PlyType::u8: return static_cast<float>(load_as<std::uint8_t>(p));
    case PlyType::i16: return static_cast<float>(load_as<std::int16_t>(p));
    case PlyType::u16: return static_cast<float>(load_as<std::uint16_t>(p));
    case PlyType::i32: return static_cast<float>(load_as<std::int32_t>(p));
    case PlyType::u32: return static_cast<float>(load_as<std::uint32_t>(p));
    case PlyType::f32: return load_as<float>(p);
    case PlyType::f64: return static_cast<float>(load_as<double>(p));
    }
    return 0.f;
}

struct Property {
    std::string name;
    PlyType type;
    std::size_t offset;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
    std::size_t stride = 0;
    bool has_list = false;
};

std::vector<std::string> property_order(int sh_degree)
{
    std::vector<std::string> names{"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    const int rest = 3 * (sh_coeff_count(sh_degree) - 1);
    for (int i = 0; i < rest; ++i) names.push_back("f_rest_" + std::to_string(i));
    for (const char* n : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        names.emplace_back(n);
    }
    return names;
}

} // namespace

std::string encode_scene_ply(const Scene& scene)
{
    if (scene.sh_degree < 0 || scene.sh_degree > kMaxShDegree) throw ValidationError("PLY: unsupported SH degree");
    const std::vector<std::string> names = property_order(scene.sh_degree);
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.size() << "\n";
    for (const auto& n : names) header << "property float " << n << "\n";
    header << "end_header\n";

    const int rest = sh_coeff_count(scene.sh_degree) - 1;
    std::string out = header.str();
    std::vector<float> row(names.size());
    out.reserve(out.size() + scene.size() * row.size() * sizeof(float));
    for (const GaussianSplat& s : scene.splats) {
        std::size_t k = 0;
        for (int i = 0; i < 3; ++i) row[k++] = s.position[i];
        for (int i = 0; i < 3; ++i) row[k++] = 0.f;
        for (int c = 0; c < 3; ++c) row[k++] = s.sh[0][c];
        for (int c = 0; c < 3; ++c)
            for (int j = 1; j <= rest; ++j) row[k++] = s.sh[j][c];
        row[k++] = s.opacity_logit;
        for (int i = 0; i < 3; ++i) row[k++] = s.log_scale[i];
        for (int i = 0; i < 4; ++i) row[k++] = s.rotation[i];
        out.append(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
    return out;
}

Scene decode_scene_ply(std::string_view bytes)
{
    const std::size_t end = bytes.find("end_header");
    if (bytes.substr(0, 3) != "ply" || end == std::string_view::npos) throw ParseError("PLY: not a PLY file");
    std::size_t body = bytes.find('\n', end);
    if (body == std::string_view::npos) throw ParseError("PLY: header is not terminated");
    ++body;

    std::istringstream header{std::string(bytes.substr(0, end))};
    std::vector<Element> elements;
    std::string line;
    bool format_seen = false;
    std::getline(header, line);
    while (std::getline(header, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian") throw ParseError("PLY: unsupported format '" + fmt + "'");
            format_seen = true;
        } else if (kw == "element") {
            Element e;
            if (!(ls >> e.name >> e.count)) throw ParseError("PLY: bad element line '" + line + "'");
            elements.push_back(e);
        } else if (kw == "property") {
            if (elements.empty()) throw ParseError("PLY: property before any element");
            Element& e = elements.back();
            std::string type, name;
            ls >> type;
            if (type == "list") {
                e.has_list = true;
                continue;
            }
            ls >> name;
            const auto t = parse_type(type);
            if (!t || name.empty()) throw ParseError("PLY: bad property line '" + line + "'");
            e.properties.push_back({name, *t, e.stride});
            e.stride += type_size(*t);
        } else {
            throw ParseError("PLY: unexpected header keyword '" + kw + "'");
        }
    }
    if (!format_seen) throw ParseError("PLY: missing format line");

    std::size_t offset = body;
    const Element* vertex = nullptr;
    for (const Element& e : elements) {
        if (e.name == "vertex") {
            vertex = &e;
            break;
        }
        if (e.has_list) throw ParseError("PLY: list properties before the vertex element are not supported");
        offset += e.count * e.stride;
    }
    if (!vertex) throw ParseError("PLY: missing element vertex");
    if (vertex->has_list) throw ParseError("PLY: list property in the vertex element");

    std::map<std::string, const Property*> by_name;
    for (const Property& p : vertex->properties) by_name[p.name] = &p;
    auto require = [&](const std::string& name) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw ParseError("missing property " + name);
        return it->second;
    };
    const char* required[] = {"x",       "y",       "z",     "opacity", "scale_0", "scale_1", "scale_2",
                              "rot_0",   "rot_1",   "rot_2", "rot_3",   "f_dc_0",  "f_dc_1",  "f_dc_2"};
    std::vector<const Property*> req;
    for (const char* n : required) req.push_back(require(n));

    int n_rest = 0;
    while (by_name.count("f_rest_" + std::to_string(n_rest))) ++n_rest;
    for (const auto& [name, p] : by_name) {
        if (name.rfind("f_rest_", 0) == 0 && name.size() > 7 &&
            name.find_first_not_of("0123456789", 7) == std::string::npos &&
            std::stoul(name.substr(7)) >= static_cast<unsigned long>(n_rest)) {
            throw ParseError("PLY: f_rest properties are not contiguous (missing property f_rest_" +
                             std::to_string(n_rest) + ")");
        }
    }
    Scene scene;
    scene.sh_degree = -1;
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (3 * (sh_coeff_count(d) - 1) == n_rest) scene.sh_degree = d;
    }
    if (scene.sh_degree < 0) throw ParseError("PLY: " + std::to_string(n_rest) + " f_rest properties match no SH degree");
    const int rest = sh_coeff_count(scene.sh_degree) - 1;
    std::vector<const Property*> rest_props;
    for (int i = 0; i < n_rest; ++i) rest_props.push_back(by_name.at("f_rest_" + std::to_string(i)));

    if (bytes.size() < offset || (bytes.size() - offset) / vertex->stride < vertex->count) {
        throw ParseError("PLY: body is truncated (expected " + std::to_string(vertex->count) + " vertices)");
    }
    scene.splats.resize(vertex->count);
    for (std::size_t i = 0; i < vertex->count; ++i) {
        const char* row = bytes.data() + offset + i * vertex->stride;
        auto get = [&](const Property* p) { return read_value(row + p->offset, p->type); };
        GaussianSplat& s = scene.splats[i];
        for (int k = 0; k < 3; ++k) s.position[k] = get(req[k]);
        s.opacity_logit = get(req[3]);
        for (int k = 0; k < 3; ++k) s.log_scale[k] = get(req[4 + k]);
        for (int k = 0; k < 4; ++k) s.rotation[k] = get(req[7 + k]);
        for (int c = 0; c < 3; ++c) s.sh[0][c] = get(req[11 + c]);
        for (int c = 0; c < 3; ++c)
            for (int j = 1; j <= rest; ++j) s.sh[j][c] = get(rest_props[c * rest + (j - 1)]);

        bool finite = s.position.allFinite() && s.log_scale.allFinite() && s.rotation.allFinite() &&
                      std::isfinite(s.opacity_logit);
        for (int j = 0; j <= rest; ++j) finite = finite && s.sh[j].allFinite();
        if (!finite) throw ValidationError("PLY: splat " + std::to_string(i) + " has a non-finite value");
    }
    return scene;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

void save_scene(const Scene& scene, const std::filesystem::path& path)
{
    write_file(path, encode_scene_ply(scene));
}

Scene load_scene(const std::filesystem::path& path)
{
    return decode_scene_ply(read_file(path));
}

} // namespace gsedit
