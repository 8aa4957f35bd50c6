#include <algorithm>

#include <json.hpp>

#include "gsedit/error.hpp"
#include "gsedit/metrics.hpp"

namespace gsedit {
namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v)
{
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json optional_array(const std::vector<std::optional<double>>& values)
{
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& v : values) out.push_back(optional_json(v));
    return out;
}

} // namespace

std::optional<double> cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    if (a.size() != b.size()) throw ValidationError("cosine: dimension mismatch");
    const double na = a.norm(), nb = b.norm();
    if (!(na >= kMinNorm) || !(nb >= kMinNorm)) return std::nullopt;
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::optional<double> directional_similarity(const ImageBuffer& x, const ImageBuffer& x_hat,
                                             const std::string& text, const std::string& text_hat,
                                             EmbeddingProvider& provider)
{
    return cosine(provider.embed_image(x) - provider.embed_image(x_hat),
                  provider.embed_text(text) - provider.embed_text(text_hat));
}

std::optional<double> directional_consistency(const ImageBuffer& x, const ImageBuffer& x_next,
                                              const ImageBuffer& x_hat, const ImageBuffer& x_hat_next,
                                              EmbeddingProvider& provider)
{
    return cosine(provider.embed_image(x_hat) - provider.embed_image(x),
                  provider.embed_image(x_hat_next) - provider.embed_image(x_next));
}

std::optional<double> text_similarity(const ImageBuffer& x_hat, const std::string& prompt,
                                      EmbeddingProvider& provider)
{
    return cosine(provider.embed_text(prompt), provider.embed_image(x_hat));
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& values)
{
    double sum = 0.0;
    int n = 0;
    for (const auto& v : values) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

MetricReport evaluate_edit(const EditEvaluation& input, EmbeddingProvider& provider)
{
    if (!input.originals || !input.edited) throw ValidationError("evaluate_edit: missing renders");
    const auto& orig = *input.originals;
    const auto& edit = *input.edited;
    if (orig.size() != edit.size() || orig.empty()) {
        throw ValidationError("evaluate_edit: need the same nonzero number of original and edited views");
    }
    std::vector<Eigen::VectorXd> e_orig, e_edit;
    for (const auto& img : orig) e_orig.push_back(provider.embed_image(img));
    for (const auto& img : edit) e_edit.push_back(provider.embed_image(img));
    const Eigen::VectorXd t_src = provider.embed_text(input.source_caption);
    const Eigen::VectorXd t_dst = provider.embed_text(input.target_caption);

    MetricReport report;
    report.embedder = provider.name();
    for (std::size_t i = 0; i < orig.size(); ++i) {
        report.clip_sim_per_view.push_back(cosine(e_orig[i] - e_edit[i], t_src - t_dst));
        report.clip_text_per_view.push_back(cosine(t_dst, e_edit[i]));
        if (i + 1 < orig.size()) {
            report.clip_cons_per_pair.push_back(cosine(e_edit[i] - e_orig[i], e_edit[i + 1] - e_orig[i + 1]));
        }
    }
    report.clip_sim = mean_defined(report.clip_sim_per_view);
    report.clip_cons = mean_defined(report.clip_cons_per_pair);
    report.clip_text = mean_defined(report.clip_text_per_view);
    return report;
}

std::string MetricReport::to_json(bool with_timings) const
{
    nlohmann::ordered_json j;
    j["clip_sim"] = optional_json(clip_sim);
    j["clip_cons"] = optional_json(clip_cons);
    j["clip_text"] = optional_json(clip_text);
    j["per_view"] = {{"clip_sim", optional_array(clip_sim_per_view)},
                     {"clip_cons", optional_array(clip_cons_per_pair)},
                     {"clip_text", optional_array(clip_text_per_view)}};
    j["embedder"] = embedder;
    if (with_timings) {
        nlohmann::ordered_json t = nlohmann::ordered_json::object();
        for (const auto& [stage, seconds] : timings_s) t[stage] = seconds;
        j["timings_s"] = t;
    }
    return j.dump(2) + "\n";
}

} // namespace gsedit
