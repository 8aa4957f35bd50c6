#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "gsedit/camera.hpp"
#include "gsedit/edit.hpp"
#include "gsedit/mesh.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit {

/// Everything a pipeline run needs besides file paths. Serialized as an INI file with
/// sections run, rig, recon, edit, mesh, texture.
struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string oracle = "hue_shift";    // name[:params] or remote:URL
    std::string refine_oracle = "sharpen";
    std::string embedder = "toy";        // toy or remote:URL
    std::string codec = "identity";
    std::string prompt;                  // edit instruction
    std::string refine_prompt;           // generative caption of the edited object
    std::string source_prompt = "a 3d object";

    RigSettings rig;
    ReconConfig recon;
    EditConfig edit;

    double mesh_threshold = 1.0;
    GridSettings grid;
    PostprocessSettings postprocess;
    AtlasSettings atlas;
    BackprojectSettings backproject;
    RefineConfig refine;

    /// Throws ValidationError naming the first bad field.
    void validate() const;
};

/// Throws ParseError naming the line or the unknown section/key ("unknown config key edit.foo").
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Canonical form: every key, in a fixed order, one section at a time.
std::string serialize_config(const PipelineConfig& config);

/// Sets one "section.key" from its text form; the same rules as the file parser.
void set_config_value(PipelineConfig& config, const std::string& dotted_key, const std::string& value);

struct OracleSpec {
    std::string name;
    OracleParams params;
};

/// "name", "name:p1,p2" or "remote:URL[,p1...]". Parameters are `key=value` pairs
/// (strength, hue, delta, fraction, factor, timeout_ms, retries); a bare token is a
/// hue, either in degrees or as a color word ("hue_shift:red").
OracleSpec parse_oracle_spec(const std::string& spec);
std::unique_ptr<EditOracle> make_oracle(const std::string& spec);
/// identity, sharpen, or any edit oracle spec run in denoise mode.
std::unique_ptr<RefineOracle> make_refiner(const std::string& spec);

} // namespace gsedit
