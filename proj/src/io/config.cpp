#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "gsedit/color.hpp"
#include "gsedit/config.hpp"
#include "gsedit/error.hpp"
#include "gsedit/io.hpp"

namespace gsedit {
namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string format_double(double v)
{
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}

template <typename T>
T parse_numeric(const std::string& key, const std::string& text)
{
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw ParseError("config key " + key + ": bad value '" + text + "'");
    }
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(v)) throw ParseError("config key " + key + ": value must be finite");
    }
    return v;
}

struct Entry {
    std::string section;
    std::string key;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&)> set;

    std::string dotted() const { return section + "." + key; }
};

template <typename T, typename Access>
Entry numeric(std::string section, std::string key, Access access)
{
    Entry e{section, key, {}, {}};
    e.get = [access](const PipelineConfig& c) {
        const T v = access(const_cast<PipelineConfig&>(c));
        if constexpr (std::is_floating_point_v<T>) {
            return format_double(v);
        } else {
            return std::to_string(v);
        }
    };
    const std::string name = e.dotted();
    e.set = [access, name](PipelineConfig& c, const std::string& text) { access(c) = parse_numeric<T>(name, text); };
    return e;
}

template <typename Access>
Entry text(std::string section, std::string key, Access access)
{
    Entry e{section, key, {}, {}};
    e.get = [access](const PipelineConfig& c) { return access(const_cast<PipelineConfig&>(c)); };
    e.set = [access](PipelineConfig& c, const std::string& v) { access(c) = v; };
    return e;
}

#define GSEDIT_FIELD(expr) [](PipelineConfig & c) -> auto& { return expr; }

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> table = [] {
        std::vector<Entry> t;
        t.push_back(numeric<std::uint64_t>("run", "seed", GSEDIT_FIELD(c.seed)));
        t.push_back(text("run", "oracle", GSEDIT_FIELD(c.oracle)));
        t.push_back(text("run", "refine_oracle", GSEDIT_FIELD(c.refine_oracle)));
        t.push_back(text("run", "embedder", GSEDIT_FIELD(c.embedder)));
        t.push_back(text("run", "codec", GSEDIT_FIELD(c.codec)));
        t.push_back(text("run", "prompt", GSEDIT_FIELD(c.prompt)));
        t.push_back(text("run", "refine_prompt", GSEDIT_FIELD(c.refine_prompt)));
        t.push_back(text("run", "source_prompt", GSEDIT_FIELD(c.source_prompt)));

        t.push_back(numeric<int>("rig", "n_per_ring", GSEDIT_FIELD(c.rig.n_per_ring)));
        {
            Entry e{"rig", "elevations", {}, {}};
            e.get = [](const PipelineConfig& c) {
                std::string s;
                for (std::size_t i = 0; i < c.rig.elevations.size(); ++i) {
                    s += (i ? ", " : "") + format_double(c.rig.elevations[i]);
                }
                return s;
            };
            e.set = [](PipelineConfig& c, const std::string& v) {
                std::vector<double> out;
                std::istringstream ss(v);
                std::string item;
                while (std::getline(ss, item, ',')) out.push_back(parse_numeric<double>("rig.elevations", trim(item)));
                c.rig.elevations = out;
            };
            t.push_back(e);
        }
        t.push_back(numeric<double>("rig", "radius", GSEDIT_FIELD(c.rig.radius)));
        t.push_back(numeric<double>("rig", "fov_y", GSEDIT_FIELD(c.rig.fov_y)));
        t.push_back(numeric<int>("rig", "width", GSEDIT_FIELD(c.rig.width)));
        t.push_back(numeric<int>("rig", "height", GSEDIT_FIELD(c.rig.height)));

        t.push_back(numeric<int>("recon", "n_initial", GSEDIT_FIELD(c.recon.n_initial)));
        t.push_back(numeric<int>("recon", "n_steps", GSEDIT_FIELD(c.recon.n_steps)));
        t.push_back(numeric<int>("recon", "densify_interval", GSEDIT_FIELD(c.recon.densify_interval)));
        t.push_back(numeric<double>("recon", "densify_until", GSEDIT_FIELD(c.recon.densify_until)));
        t.push_back(numeric<double>("recon", "loss_lambda", GSEDIT_FIELD(c.recon.loss_lambda)));
        t.push_back(numeric<double>("recon", "prune_opacity", GSEDIT_FIELD(c.recon.densify.prune_opacity)));
        t.push_back(numeric<double>("recon", "split_scale_factor", GSEDIT_FIELD(c.recon.densify.split_scale_factor)));
        t.push_back(numeric<double>("recon", "grad_threshold", GSEDIT_FIELD(c.recon.densify.grad_threshold)));
        t.push_back(numeric<double>("recon", "percent_dense", GSEDIT_FIELD(c.recon.densify.percent_dense)));
        t.push_back(numeric<int>("recon", "sh_degree", GSEDIT_FIELD(c.recon.sh_degree)));
        t.push_back(numeric<double>("recon", "init_extent", GSEDIT_FIELD(c.recon.init_extent)));
        t.push_back(numeric<double>("recon", "init_opacity", GSEDIT_FIELD(c.recon.init_opacity)));

        t.push_back(numeric<int>("edit", "n_steps", GSEDIT_FIELD(c.edit.n_edit_steps)));
        t.push_back(numeric<double>("edit", "t_min", GSEDIT_FIELD(c.edit.t_min)));
        t.push_back(numeric<double>("edit", "t_max", GSEDIT_FIELD(c.edit.t_max)));
        t.push_back(numeric<double>("edit", "text_scale", GSEDIT_FIELD(c.edit.text_scale)));
        t.push_back(numeric<double>("edit", "image_scale", GSEDIT_FIELD(c.edit.image_scale)));
        {
            Entry e{"edit", "weighting", {}, {}};
            e.get = [](const PipelineConfig& c) {
                return std::string(c.edit.weighting == Weighting::constant ? "constant" : "one_minus_alpha_bar");
            };
            e.set = [](PipelineConfig& c, const std::string& v) {
                if (v == "constant") {
                    c.edit.weighting = Weighting::constant;
                } else if (v == "one_minus_alpha_bar") {
                    c.edit.weighting = Weighting::one_minus_alpha_bar;
                } else {
                    throw ParseError("config key edit.weighting: expected constant or one_minus_alpha_bar, got '" + v + "'");
                }
            };
            t.push_back(e);
        }
        t.push_back(numeric<double>("edit", "weight_scale", GSEDIT_FIELD(c.edit.weight_scale)));
        t.push_back(numeric<int>("edit", "convergence_window", GSEDIT_FIELD(c.edit.convergence_window)));
        t.push_back(numeric<double>("edit", "convergence_threshold", GSEDIT_FIELD(c.edit.convergence_threshold)));
        t.push_back(numeric<int>("edit", "max_oracle_failures", GSEDIT_FIELD(c.edit.max_oracle_failures)));

        t.push_back(numeric<double>("mesh", "threshold", GSEDIT_FIELD(c.mesh_threshold)));
        t.push_back(numeric<int>("mesh", "blocks", GSEDIT_FIELD(c.grid.blocks)));
        t.push_back(numeric<int>("mesh", "block_samples", GSEDIT_FIELD(c.grid.block_samples)));
        t.push_back(numeric<double>("mesh", "bound_scale", GSEDIT_FIELD(c.grid.bound_scale)));
        t.push_back(numeric<std::size_t>("mesh", "target_faces", GSEDIT_FIELD(c.postprocess.target_faces)));
        t.push_back(numeric<double>("mesh", "smoothing_lambda", GSEDIT_FIELD(c.postprocess.smoothing_lambda)));
        t.push_back(numeric<int>("mesh", "smoothing_passes", GSEDIT_FIELD(c.postprocess.smoothing_passes)));
        t.push_back(numeric<double>("mesh", "min_component_area", GSEDIT_FIELD(c.postprocess.min_component_area)));

        t.push_back(numeric<int>("texture", "size", GSEDIT_FIELD(c.atlas.texture_size)));
        t.push_back(numeric<int>("texture", "gutter", GSEDIT_FIELD(c.atlas.gutter)));
        t.push_back(numeric<double>("texture", "depth_tolerance", GSEDIT_FIELD(c.backproject.depth_tolerance)));
        t.push_back(numeric<double>("texture", "min_alpha", GSEDIT_FIELD(c.backproject.min_alpha)));
        t.push_back(numeric<int>("texture", "refine_steps", GSEDIT_FIELD(c.refine.n_steps)));
        t.push_back(numeric<double>("texture", "t_start", GSEDIT_FIELD(c.refine.t_start)));
        t.push_back(numeric<double>("texture", "learning_rate", GSEDIT_FIELD(c.refine.learning_rate)));
        t.push_back(numeric<int>("texture", "max_oracle_failures", GSEDIT_FIELD(c.refine.max_oracle_failures)));
        return t;
    }();
    return table;
}

#undef GSEDIT_FIELD

const Entry* find_entry(const std::string& section, const std::string& key)
{
    for (const Entry& e : entries()) {
        if (e.section == section && e.key == key) return &e;
    }
    return nullptr;
}

} // namespace

void PipelineConfig::validate() const
{
    recon.validate();
    edit.validate();
    if (rig.n_per_ring < 1 || rig.elevations.empty()) throw ValidationError("rig: need at least one camera");
    if (!(rig.radius > 0.0) || !(rig.fov_y > 0.0 && rig.fov_y < 180.0)) throw ValidationError("rig: bad radius or fov_y");
    if (rig.width < 8 || rig.height < 8) throw ValidationError("rig: images must be at least 8x8");
    if (!(mesh_threshold > 0.0)) throw ValidationError("mesh.threshold must be positive");
    if (grid.blocks < 1 || grid.block_samples < 2 || !(grid.bound_scale >= 1.0)) throw ValidationError("mesh: bad grid");
    if (postprocess.target_faces < 4 || postprocess.smoothing_passes < 0) throw ValidationError("mesh: bad postprocess settings");
    if (atlas.texture_size < 16 || atlas.gutter < 0) throw ValidationError("texture: bad size or gutter");
    if (refine.n_steps < 0 || !(refine.t_start > 0.0 && refine.t_start < 1.0) || !(refine.learning_rate > 0.0)) {
        throw ValidationError("texture: bad refinement settings");
    }
}

void set_config_value(PipelineConfig& config, const std::string& dotted_key, const std::string& value)
{
    const auto dot = dotted_key.find('.');
    const Entry* e = dot == std::string::npos ? nullptr : find_entry(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
    if (!e) throw ParseError("unknown config key " + dotted_key);
    e->set(config, value);
}

PipelineConfig parse_config(const std::string& text, PipelineConfig base)
{
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("config line " + std::to_string(line_no) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const Entry& e : entries()) known = known || e.section == section;
            if (!known) throw ParseError("unknown config section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        if (section.empty()) throw ParseError("config line " + std::to_string(line_no) + ": key outside a section");
        set_config_value(base, section + "." + trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base)
{
    return parse_config(read_file(path), std::move(base));
}

std::string serialize_config(const PipelineConfig& config)
{
    std::string out, section;
    for (const Entry& e : entries()) {
        if (e.section != section) {
            out += (section.empty() ? "[" : "\n[") + e.section + "]\n";
            section = e.section;
        }
        out += e.key + " = " + e.get(config) + "\n";
    }
    return out;
}

OracleSpec parse_oracle_spec(const std::string& spec)
{
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    OracleParams p;
    std::string params = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (name == "remote") {
        // remote:URL[,key=value...]
        const auto comma = params.find(',');
        p.url = params.substr(0, comma);
        params = comma == std::string::npos ? "" : params.substr(comma + 1);
        if (p.url.empty()) throw ValidationError("oracle " + spec + ": remote needs a url");
    }
    if (!params.empty()) {
        std::istringstream ss(params);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            const auto eq = item.find('=');
            const std::string key = eq == std::string::npos ? "hue" : item.substr(0, eq);
            const std::string value = eq == std::string::npos ? item : item.substr(eq + 1);
            const std::string where = "oracle " + spec + ": " + key;
            if (key == "hue") {
                if (const auto h = hue_from_text(value)) {
                    p.hue_deg = *h;
                } else {
                    p.hue_deg = parse_numeric<double>(where, value);
                }
            } else if (key == "strength") {
                p.strength = parse_numeric<double>(where, value);
            } else if (key == "delta") {
                p.brightness = parse_numeric<double>(where, value);
            } else if (key == "fraction") {
                p.region_fraction = parse_numeric<double>(where, value);
            } else if (key == "factor") {
                p.region_factor = parse_numeric<double>(where, value);
            } else if (key == "timeout_ms") {
                p.timeout = std::chrono::milliseconds(parse_numeric<int>(where, value));
            } else if (key == "retries") {
                p.retries = parse_numeric<int>(where, value);
            } else {
                throw ValidationError("oracle " + spec + ": unknown parameter '" + key + "'");
            }
        }
    }
    return {name, p};
}

std::unique_ptr<EditOracle> make_oracle(const std::string& spec)
{
    const OracleSpec s = parse_oracle_spec(spec);
    return builtin_oracle(s.name, s.params);
}

std::unique_ptr<RefineOracle> make_refiner(const std::string& spec)
{
    const OracleSpec s = parse_oracle_spec(spec);
    return builtin_refiner(s.name, s.params);
}

} // namespace gsedit
