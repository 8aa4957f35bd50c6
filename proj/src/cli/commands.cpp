#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsedit/cli.hpp"
#include "gsedit/config.hpp"
#include "gsedit/error.hpp"
#include "gsedit/io.hpp"
#include "gsedit/metrics.hpp"
#include "gsedit/parallel.hpp"
#include "gsedit/renderer.hpp"

namespace gsedit {
namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string input;
    std::string scene;
    std::string edited;
    std::string out = ".";
    std::optional<std::string> prompt;
    std::optional<std::string> refine_prompt;
    std::optional<std::string> source_prompt;
    std::optional<std::string> oracle;
    std::optional<std::string> refine_oracle;
    std::optional<std::string> embedder;
    std::optional<std::uint64_t> seed;
    std::optional<int> steps;
    std::optional<int> recon_steps;
    std::optional<int> n_initial;
    std::optional<int> refine_steps;
    std::optional<int> texture_size;
    std::optional<int> resolution;
    std::optional<double> t_max;
    std::optional<double> t_min;
    std::optional<double> s_t;
    std::optional<double> s_i;
    std::vector<std::string> overrides;
    int frames = 20;
    int threads = 0;
    bool print_config = false;
    bool timings_in_report = false;
};

// Stage name and seconds, appended as stages finish.
class Timings {
public:
    explicit Timings(std::ostream& log) : log_(log) {}

    template <typename Fn>
    auto run(const std::string& stage, Fn&& fn)
    {
        log_ << "[" << stage << "] started\n";
        const auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            entries_.emplace_back(stage, s);
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.2f", s);
            log_ << "[" << stage << "] done in " << buf << " s\n";
        };
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            finish();
        } else {
            auto result = fn();
            finish();
            return result;
        }
    }

    const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

    std::string to_json() const
    {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [stage, s] : entries_) j[stage] = s;
        return nlohmann::ordered_json{{"timings_s", j}}.dump(2) + "\n";
    }

private:
    std::ostream& log_;
    std::vector<std::pair<std::string, double>> entries_;
};

PipelineConfig resolve_config(const Options& o)
{
    PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config);
    for (const std::string& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects section.key=value, got '" + kv + "'");
        set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) c.seed = *o.seed;
    if (o.prompt) c.prompt = *o.prompt;
    if (o.refine_prompt) c.refine_prompt = *o.refine_prompt;
    if (o.source_prompt) c.source_prompt = *o.source_prompt;
    if (o.oracle) c.oracle = *o.oracle;
    if (o.refine_oracle) c.refine_oracle = *o.refine_oracle;
    if (o.embedder) c.embedder = *o.embedder;
    if (o.steps) c.edit.n_edit_steps = *o.steps;
    if (o.recon_steps) c.recon.n_steps = *o.recon_steps;
    if (o.n_initial) c.recon.n_initial = *o.n_initial;
    if (o.refine_steps) c.refine.n_steps = *o.refine_steps;
    if (o.texture_size) c.atlas.texture_size = *o.texture_size;
    if (o.resolution) c.rig.width = c.rig.height = *o.resolution;
    if (o.t_max) c.edit.t_max = *o.t_max;
    if (o.t_min) c.edit.t_min = *o.t_min;
    if (o.s_t) c.edit.text_scale = *o.s_t;
    if (o.s_i) c.edit.image_scale = *o.s_i;

    // One seed drives every stage.
    c.recon.seed = c.seed;
    c.edit.seed = c.seed + 1;
    c.refine.seed = c.seed + 2;
    c.backproject.texture_size = c.atlas.texture_size;
    c.validate();
    return c;
}

std::string target_caption(const PipelineConfig& c)
{
    return c.refine_prompt.empty() ? c.prompt : c.refine_prompt;
}

void require_prompt(const PipelineConfig& c, const char* stage)
{
    if (c.prompt.empty()) throw ValidationError(std::string(stage) + " needs --prompt");
}

void require_path(const std::string& path, const char* flag)
{
    if (path.empty()) throw ValidationError(std::string("missing ") + flag);
}

fs::path output_dir(const Options& o)
{
    fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

bool has_extension(const std::string& path, const char* ext)
{
    std::string e = fs::path(path).extension().string();
    for (char& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return e == ext;
}

// ---- stages -----------------------------------------------------------------

Scene reconstruct_stage(const std::string& input, const PipelineConfig& c, std::ostream& log)
{
    const CameraRig rig = build_camera_rig(c.rig);
    const std::vector<TrainingView> views = load_mesh_input(input, rig);
    ReconObserver observer;
    const int every = std::max(1, c.recon.n_steps / 10);
    observer.on_step = [&](int step, double loss, const Scene& s) {
        if ((step + 1) % every == 0) {
            log << "  reconstruct step " << step + 1 << "/" << c.recon.n_steps << " loss " << loss << " splats "
                << s.size() << "\n";
        }
    };
    return reconstruct(views, c.recon, observer);
}

Scene load_input_scene(const std::string& input, const PipelineConfig& c, Timings& timings, std::ostream& log)
{
    if (has_extension(input, ".ply")) return timings.run("load", [&] { return load_scene(input); });
    if (has_extension(input, ".obj")) return timings.run("reconstruct", [&] { return reconstruct_stage(input, c, log); });
    throw ValidationError("--input must be an .obj mesh or a .ply splat scene: " + input);
}

Scene edit_stage(const Scene& scene, const PipelineConfig& c, std::ostream& log)
{
    const CameraRig rig = build_camera_rig(c.rig);
    const auto oracle = make_oracle(c.oracle);
    const auto codec = make_codec(c.codec);
    EditObserver observer;
    const int every = std::max(1, c.edit.n_edit_steps / 10);
    observer.on_step = [&](int step, int, const SdsDiagnostics& d, const Scene&) {
        if ((step + 1) % every == 0) {
            log << "  edit step " << step + 1 << "/" << c.edit.n_edit_steps << " t " << d.t << " residual "
                << d.residual_rms << "\n";
        }
    };
    observer.on_oracle_failure = [&](int step, const std::string& msg) {
        log << "  edit step " << step << ": oracle failure: " << msg << "\n";
    };
    EditResult r = edit(scene, rig, *oracle, *codec, c.prompt, c.edit, observer);
    log << "  edit ran " << r.steps_run << " steps" << (r.converged ? " (converged)" : "") << ", "
        << r.oracle_failures << " oracle failures\n";
    return std::move(r.scene);
}

Mesh extract_stage(const Scene& scene, const PipelineConfig& c, Timings& timings, std::ostream& log)
{
    const CameraRig rig = build_camera_rig(c.rig);
    SurfaceResult surface = timings.run("marching_cubes", [&] { return extract_surface(scene, c.mesh_threshold, c.grid); });
    if (!surface.warning.empty()) log << "  " << surface.warning << "\n";
    if (surface.empty) throw Error("mesh extraction produced no surface at threshold " + std::to_string(c.mesh_threshold));
    log << "  raw mesh: " << surface.mesh.faces.size() << " faces\n";
    Mesh mesh = timings.run("decimate", [&] { return postprocess_mesh(std::move(surface.mesh), c.postprocess); });
    log << "  decimated mesh: " << mesh.faces.size() << " faces\n";
    mesh = timings.run("uv_atlas", [&] { return unwrap_uv(mesh, c.atlas); });
    mesh.texture = timings.run("backproject", [&] { return backproject_colors(mesh, scene, rig, c.backproject); });
    return mesh;
}

Mesh refine_stage(const Mesh& mesh, const PipelineConfig& c, std::ostream& log)
{
    const CameraRig rig = build_camera_rig(c.rig);
    const auto refiner = make_refiner(c.refine_oracle);
    RefineResult r = refine_texture(mesh, rig, *refiner, target_caption(c), c.refine);
    log << "  refine ran " << r.steps_run << " steps, " << r.oracle_failures << " oracle failures\n";
    return std::move(r.mesh);
}

MetricReport metrics_stage(const Scene& original, const Scene& edited, const PipelineConfig& c)
{
    const CameraRig rig = build_camera_rig(c.rig);
    std::vector<ImageBuffer> before, after;
    for (const Camera& cam : rig) {
        before.push_back(render(original, cam));
        after.push_back(render(edited, cam));
    }
    const auto provider = make_embedder(c.embedder);
    return evaluate_edit({&before, &after, c.source_prompt, target_caption(c)}, *provider);
}

// Rig path with `frames` stops: ring r covers [r, r + 1) of the path parameter.
CameraRig render_path(const PipelineConfig& c, int frames)
{
    if (frames < 1) throw ValidationError("--frames must be positive");
    const std::size_t rings = c.rig.elevations.size();
    CameraRig path;
    for (int i = 0; i < frames; ++i) {
        const double s = static_cast<double>(i) * static_cast<double>(rings) / frames;
        const std::size_t ring = std::min(rings - 1, static_cast<std::size_t>(s));
        const double azimuth = (s - static_cast<double>(ring)) * 360.0;
        path.emplace_back(azimuth, c.rig.elevations[ring], c.rig.radius, c.rig.fov_y, c.rig.width, c.rig.height);
    }
    return path;
}

void write_report(const fs::path& dir, MetricReport report, const Timings& timings, bool timings_in_report)
{
    report.timings_s = timings.entries();
    write_file(dir / "report.json", report.to_json(timings_in_report));
    if (!timings_in_report) write_file(dir / "timings.json", timings.to_json());
}

// ---- subcommands --------------------------------------------------------------

using Command = std::function<void(const Options&, const PipelineConfig&, std::ostream&)>;

void cmd_reconstruct(const Options& o, const PipelineConfig& c, std::ostream& log)
{
    require_path(o.input, "--input");
    if (!has_extension(o.input, ".obj")) throw ValidationError("reconstruct --input must be an .obj mesh");
    const fs::path dir = output_dir(o);
    Timings timings(log);
    const Scene scene = timings.run("reconstruct", [&] { return reconstruct_stage(o.input, c, log); });
    save_scene(scene, dir / "scene.ply");
    write_file(dir / "timings.json", timings.to_json());
}

void cmd_edit(const Options& o, const PipelineConfig& c, std::ostream& log)
{
    require_path(o.scene, "--scene");
    require_prompt(c, "edit");
    const fs::path dir = output_dir(o);
    Timings timings(log);
    const Scene scene = load_scene(o.scene);
    const Scene edited = timings.run("edit", [&] { return edit_stage(scene, c, log); });
    save_scene(edited, dir / "edited.ply");
    write_file(dir / "timings.json", timings.to_json());
}

void cmd_extract_mesh(const Options& o, const PipelineConfig& c, std::ostream& log)
{
    require_path(o.scene, "--scene");
    const fs::path dir = output_dir(o);
    Timings timings(log);
    const Scene scene = load_scene(o.scene);
    const Mesh mesh = extract_stage(scene, c, timings, log);
    save_obj(mesh, dir / "mesh.obj");
    write_file(dir / "timings.json", timings.to_json());
}

void cmd_refine_texture(const Options& o, const PipelineConfig& c, std::ostream& log)
{
    require_path(o.input, "--input");
    if (target_caption(c).empty()) throw ValidationError("refine-texture needs --refine-prompt");
    const fs::path dir = output_dir(o);
    Timings timings(log);
    const Mesh mesh = load_obj(o.input);
    const Mesh refined = timings.run("refine_texture", [&] { return refine_stage(mesh, c, log); });
    save_obj(refined, dir / "mesh.obj");
    write_file(dir / "timings.json", timings.to_json());
}

void cmd_render(const Options& o, const PipelineConfig& c, std::ostream& log)
{
    require_path(o.scene, "--scene");
    const fs::path dir = output_dir(o);
    const Scene scene = load_scene(o.scene);
    const CameraRig path = render_path(c, o.frames);
    const std::vector<Camera> cams(path.begin(), path.end());
    std::vector<ImageBuffer> frames(cams.size());
    parallel_for(static_cast<int>(cams.size()), [&](int i) { frames[i] = render(scene, cams[i]).first_channels(3); });
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03zu.png", i);
        write_png(frames[i], dir / name);
    }
    log << "wrote " << frames.size() << " frames to " << dir.string() << "\n";
}

void cmd_metrics(const Options& o, const PipelineConfig& c, std::ostream& log)
{
    require_path(o.scene, "--scene");
    require_path(o.edited, "--edited");
    if (target_caption(c).empty()) throw ValidationError("metrics needs --prompt or --refine-prompt");
    const fs::path dir = output_dir(o);
    Timings timings(log);
    const Scene original = load_scene(o.scene);
    const Scene edited = load_scene(o.edited);
    const MetricReport report = timings.run("metrics", [&] { return metrics_stage(original, edited, c); });
    write_report(dir, report, timings, o.timings_in_report);
}

void cmd_pipeline(const Options& o, const PipelineConfig& c, std::ostream& log)
{
    require_path(o.input, "--input");
    require_prompt(c, "pipeline");
    const fs::path dir = output_dir(o);
    write_file(dir / "config.ini", serialize_config(c));
    Timings timings(log);
    const Scene scene = load_input_scene(o.input, c, timings, log);
    save_scene(scene, dir / "scene.ply");
    const Scene edited = timings.run("edit", [&] { return edit_stage(scene, c, log); });
    save_scene(edited, dir / "edited.ply");
    Mesh mesh = extract_stage(edited, c, timings, log);
    mesh = timings.run("refine_texture", [&] { return refine_stage(mesh, c, log); });
    save_obj(mesh, dir / "mesh.obj");
    const MetricReport report = timings.run("metrics", [&] { return metrics_stage(scene, edited, c); });
    write_report(dir, report, timings, o.timings_in_report);
}

void add_config_flags(CLI::App& sub, Options& o)
{
    sub.add_option("--config", o.config, "INI config file (CLI flags override it)");
    sub.add_option("--set", o.overrides, "Config override section.key=value (repeatable)");
    sub.add_option("--seed", o.seed, "Random seed for every stage");
    sub.add_option("--out", o.out, "Output directory");
    sub.add_option("--resolution", o.resolution, "Rig image width and height in pixels");
    sub.add_option("--threads", o.threads, "Worker threads (default: all cores)");
    sub.add_flag("--print-config", o.print_config, "Print the resolved config and exit");
}

void add_edit_flags(CLI::App& sub, Options& o)
{
    sub.add_option("--prompt", o.prompt, "Edit instruction, e.g. \"make it red\"");
    sub.add_option("--oracle", o.oracle, "Edit oracle: name[:params] or remote:URL");
    sub.add_option("--steps", o.steps, "Edit iterations");
    sub.add_option("--tmax", o.t_max, "Upper timestep bound at the first step");
    sub.add_option("--tmin", o.t_min, "Lower timestep bound");
    sub.add_option("--st", o.s_t, "Text guidance scale");
    sub.add_option("--si", o.s_i, "Image guidance scale");
}

void add_recon_flags(CLI::App& sub, Options& o)
{
    sub.add_option("--recon-steps", o.recon_steps, "Reconstruction iterations");
    sub.add_option("--n-initial", o.n_initial, "Initial splat count");
}

void add_refine_flags(CLI::App& sub, Options& o)
{
    sub.add_option("--refine-prompt", o.refine_prompt, "Caption of the edited object, e.g. \"a red sphere\"");
    sub.add_option("--refine-oracle", o.refine_oracle, "identity, sharpen, or an edit oracle spec");
    sub.add_option("--refine-steps", o.refine_steps, "Texture refinement iterations");
    sub.add_option("--texture-size", o.texture_size, "Texture width and height in texels");
}

void add_metric_flags(CLI::App& sub, Options& o)
{
    sub.add_option("--embedder", o.embedder, "Embedding provider: toy or remote:URL");
    sub.add_option("--source-prompt", o.source_prompt, "Caption of the unedited object");
    sub.add_flag("--timings-in-report", o.timings_in_report, "Put stage timings in report.json");
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Text-guided editing of Gaussian splat scenes", "gsedit"};
    app.require_subcommand(1);
    Options o;
    std::map<CLI::App*, Command> commands;

    auto* recon = app.add_subcommand("reconstruct", "Fit a splat scene to renders of an OBJ mesh (writes scene.ply)");
    recon->add_option("--input", o.input, "Textured or vertex-colored OBJ");
    add_config_flags(*recon, o);
    add_recon_flags(*recon, o);
    commands[recon] = cmd_reconstruct;

    auto* ed = app.add_subcommand("edit", "Edit a splat scene with an oracle (writes edited.ply)");
    ed->add_option("--scene", o.scene, "Input splat PLY");
    add_config_flags(*ed, o);
    add_edit_flags(*ed, o);
    commands[ed] = cmd_edit;

    auto* ex = app.add_subcommand("extract-mesh", "Extract a textured mesh from a splat scene (writes mesh.obj)");
    ex->add_option("--scene", o.scene, "Input splat PLY");
    add_config_flags(*ex, o);
    ex->add_option("--texture-size", o.texture_size, "Texture width and height in texels");
    commands[ex] = cmd_extract_mesh;

    auto* rt = app.add_subcommand("refine-texture", "Refine the texture of a mesh (writes mesh.obj)");
    rt->add_option("--input", o.input, "Textured OBJ");
    rt->add_option("--prompt", o.prompt, "Used as the caption when --refine-prompt is absent");
    add_config_flags(*rt, o);
    add_refine_flags(*rt, o);
    commands[rt] = cmd_refine_texture;

    auto* rd = app.add_subcommand("render", "Render PNG frames of a splat scene along the rig path");
    rd->add_option("--scene", o.scene, "Input splat PLY");
    rd->add_option("--frames", o.frames, "Number of frames")->capture_default_str();
    add_config_flags(*rd, o);
    commands[rd] = cmd_render;

    auto* mt = app.add_subcommand("metrics", "Score an edit in embedding space (writes report.json)");
    mt->add_option("--scene", o.scene, "Original splat PLY");
    mt->add_option("--edited", o.edited, "Edited splat PLY");
    mt->add_option("--prompt", o.prompt, "Used as the caption when --refine-prompt is absent");
    mt->add_option("--refine-prompt", o.refine_prompt, "Caption of the edited object");
    add_config_flags(*mt, o);
    add_metric_flags(*mt, o);
    commands[mt] = cmd_metrics;

    auto* pl = app.add_subcommand("pipeline", "Reconstruct, edit, mesh, texture and score in one run");
    pl->add_option("--input", o.input, "OBJ mesh or splat PLY");
    add_config_flags(*pl, o);
    add_recon_flags(*pl, o);
    add_edit_flags(*pl, o);
    add_refine_flags(*pl, o);
    add_metric_flags(*pl, o);
    commands[pl] = cmd_pipeline;

    if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
        err << "gsedit: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
        return kExitValidation;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "gsedit: " << e.what() << "\n\n" << app.help();
        return kExitValidation;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (o.threads < 0) throw ValidationError("--threads must be non-negative");
        if (o.threads > 0) set_thread_count(o.threads);
        const PipelineConfig config = resolve_config(o);
        if (o.print_config) {
            out << serialize_config(config);
            return kExitOk;
        }
        commands.at(sub)(o, config, err);
    } catch (const ValidationError& e) {
        err << "gsedit " << sub->get_name() << ": " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "gsedit " << sub->get_name() << ": " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace gsedit
