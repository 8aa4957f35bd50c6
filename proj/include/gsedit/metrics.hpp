#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gsedit/image.hpp"

namespace gsedit {

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual int dimension() const = 0;
    /// Uses the first three channels. Throws OracleError if a remote provider fails.
    virtual Eigen::VectorXd embed_image(const ImageBuffer& image) = 0;
    virtual Eigen::VectorXd embed_text(const std::string& text) = 0;
};

/// Deterministic stand-in for CLIP (D = 76). Images: 8x8 box-downsampled luminance
/// (scaled by 1/8) followed by a 12-bin hue histogram weighted by HSV saturation, with
/// linear interpolation between neighbouring bins; the whole vector is L2-normalized.
/// Text: sum over words of a keyword direction (color words -> their hue bin, white /
/// gray words -> the flat luminance direction) or, for other words, a unit vector
/// seeded by a hash of the word; then L2-normalized. Articles are skipped.
class ToyEmbedder final : public EmbeddingProvider {
public:
    static constexpr int kLumaSide = 8;
    static constexpr int kHueBins = 12;
    static constexpr int kDimension = kLumaSide * kLumaSide + kHueBins;

    std::string name() const override { return "toy"; }
    int dimension() const override { return kDimension; }
    Eigen::VectorXd embed_image(const ImageBuffer& image) override;
    Eigen::VectorXd embed_text(const std::string& text) override;
};

/// Client for POST /embed-image and /embed-text. Request bodies are little-endian:
/// image = {width u32, height u32, channels u32 (= 3)} + row-major f32 RGB,
/// text = {length u32} + UTF-8. The reply is a f32 vector; its length fixes D.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    RemoteEmbedder(std::string url, std::chrono::milliseconds timeout, int retries);
    std::string name() const override { return "remote"; }
    /// 0 until the first reply.
    int dimension() const override { return dimension_; }
    Eigen::VectorXd embed_image(const ImageBuffer& image) override;
    Eigen::VectorXd embed_text(const std::string& text) override;

private:
    Eigen::VectorXd post(const std::string& path, const std::string& body);

    std::string url_;
    std::chrono::milliseconds timeout_;
    int retries_;
    int dimension_ = 0;
};

std::string encode_embed_image_request(const ImageBuffer& image);
std::string encode_embed_text_request(const std::string& text);
/// Throws OracleError on an empty, misaligned or non-finite body.
Eigen::VectorXd decode_embedding(const std::string& body);

/// "toy" or "remote:<url>".
std::unique_ptr<EmbeddingProvider> make_embedder(const std::string& spec);

/// Norm below which a vector counts as zero and a cosine is undefined.
inline constexpr double kMinNorm = 1e-12;

/// Cosine similarity, or nothing if either vector has norm below kMinNorm.
std::optional<double> cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// cos(E(x) - E(x_hat), E(T) - E(T_hat)).
std::optional<double> directional_similarity(const ImageBuffer& x, const ImageBuffer& x_hat,
                                             const std::string& text, const std::string& text_hat,
                                             EmbeddingProvider& provider);

/// cos(E(x_hat_i) - E(x_i), E(x_hat_next) - E(x_next)).
std::optional<double> directional_consistency(const ImageBuffer& x, const ImageBuffer& x_next,
                                              const ImageBuffer& x_hat, const ImageBuffer& x_hat_next,
                                              EmbeddingProvider& provider);

/// cos(E(prompt), E(x_hat)).
std::optional<double> text_similarity(const ImageBuffer& x_hat, const std::string& prompt,
                                      EmbeddingProvider& provider);

/// Mean of the defined entries; nothing if none is defined.
std::optional<double> mean_defined(const std::vector<std::optional<double>>& values);

struct MetricReport {
    std::optional<double> clip_sim;
    std::optional<double> clip_cons;
    std::optional<double> clip_text;
    std::vector<std::optional<double>> clip_sim_per_view;
    std::vector<std::optional<double>> clip_cons_per_pair;
    std::vector<std::optional<double>> clip_text_per_view;
    std::string embedder;
    /// Stage name and wall-clock seconds, in pipeline order.
    std::vector<std::pair<std::string, double>> timings_s;

    /// Keys: clip_sim, clip_cons, clip_text (null when undefined), per_view, embedder,
    /// and timings_s when `with_timings`.
    std::string to_json(bool with_timings = true) const;
};

/// Renders of the same camera path before and after the edit, in path order.
struct EditEvaluation {
    const std::vector<ImageBuffer>* originals = nullptr;
    const std::vector<ImageBuffer>* edited = nullptr;
    std::string source_caption;   // T
    std::string target_caption;   // T_hat, the generative prompt
};

/// clip_sim and clip_text per view, clip_cons over consecutive views; aggregates are
/// means of the defined per-view values. Each image is embedded once.
MetricReport evaluate_edit(const EditEvaluation& input, EmbeddingProvider& provider);

} // namespace gsedit
