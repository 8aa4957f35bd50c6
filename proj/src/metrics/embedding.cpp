#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "gsedit/color.hpp"
#include "gsedit/error.hpp"
#include "gsedit/metrics.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro breaks Eigen's headers.
#include <httplib.h>

namespace gsedit {
namespace {

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

constexpr int kHueOffset = ToyEmbedder::kLumaSide * ToyEmbedder::kLumaSide;

void put_u32(std::string& out, std::uint32_t v)
{
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

std::vector<std::string> words_of(const std::string& text)
{
    std::vector<std::string> words;
    std::string w;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        const unsigned char c = i < text.size() ? static_cast<unsigned char>(text[i]) : ' ';
        if (std::isalnum(c)) {
            w.push_back(static_cast<char>(std::tolower(c)));
        } else if (!w.empty()) {
            words.push_back(w);
            w.clear();
        }
    }
    return words;
}

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Eigen::VectorXd word_direction(const std::string& word)
{
    Eigen::VectorXd v = Eigen::VectorXd::Zero(ToyEmbedder::kDimension);
    if (const auto hue = hue_from_text(word)) {
        const int bin = static_cast<int>(std::lround(*hue / 30.0)) % ToyEmbedder::kHueBins;
        v[kHueOffset + bin] = 1.0;
        return v;
    }
    static const std::set<std::string> kLight{"white", "gray", "grey", "silver", "bright", "light"};
    if (kLight.count(word)) {
        v.head(kHueOffset).setConstant(1.0 / ToyEmbedder::kLumaSide);
        return v;
    }
    // Unknown words: a fixed pseudo-random direction per word.
    std::mt19937_64 rng(fnv1a(word) ^ 0x5eed5eed5eed5eedull);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < v.size(); ++i) v[i] = normal(rng);
    return v.normalized();
}

Eigen::VectorXd normalized_or_zero(const Eigen::VectorXd& v)
{
    const double n = v.norm();
    return n >= kMinNorm ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Zero(v.size());
}

} // namespace

Eigen::VectorXd ToyEmbedder::embed_image(const ImageBuffer& image)
{
    if (image.empty() || image.channels() < 3) throw ValidationError("toy embedder needs an RGB image");
    const int w = image.width(), h = image.height();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(kDimension);

    // Area-weighted box downsampling to 8x8: pixel x covers [x, x+1) * 8 / w of the grid.
    for (int gy = 0; gy < kLumaSide; ++gy) {
        const double y0 = static_cast<double>(gy) * h / kLumaSide, y1 = static_cast<double>(gy + 1) * h / kLumaSide;
        for (int gx = 0; gx < kLumaSide; ++gx) {
            const double x0 = static_cast<double>(gx) * w / kLumaSide, x1 = static_cast<double>(gx + 1) * w / kLumaSide;
            double sum = 0.0, area = 0.0;
            for (int y = static_cast<int>(std::floor(y0)); y < std::min(h, static_cast<int>(std::ceil(y1))); ++y) {
                const double wy = std::min(y1, y + 1.0) - std::max(y0, static_cast<double>(y));
                for (int x = static_cast<int>(std::floor(x0)); x < std::min(w, static_cast<int>(std::ceil(x1))); ++x) {
                    const double wx = std::min(x1, x + 1.0) - std::max(x0, static_cast<double>(x));
                    const Eigen::Vector3d rgb(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
                    sum += wx * wy * luminance(rgb);
                    area += wx * wy;
                }
            }
            out[gy * kLumaSide + gx] = area > 0.0 ? sum / area / kLumaSide : 0.0;
        }
    }

    const double bin_width = 360.0 / kHueBins;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Eigen::Vector3d hsv = rgb_to_hsv({image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2)});
            if (hsv.y() <= 0.0) continue;
            // Bin k is centered on hue k * 30 degrees.
            const double pos = hsv.x() / bin_width;
            const int lo = static_cast<int>(std::floor(pos));
            const double frac = pos - lo;
            out[kHueOffset + lo % kHueBins] += (1.0 - frac) * hsv.y();
            out[kHueOffset + (lo + 1) % kHueBins] += frac * hsv.y();
        }
    }
    out.tail(kHueBins) /= static_cast<double>(image.pixel_count());
    return normalized_or_zero(out);
}

Eigen::VectorXd ToyEmbedder::embed_text(const std::string& text)
{
    static const std::set<std::string> kSkip{"a", "an", "the"};
    Eigen::VectorXd v = Eigen::VectorXd::Zero(kDimension);
    for (const std::string& w : words_of(text)) {
        if (!kSkip.count(w)) v += word_direction(w);
    }
    return normalized_or_zero(v);
}

std::string encode_embed_image_request(const ImageBuffer& image)
{
    if (image.channels() < 3) throw ValidationError("embed request needs an RGB image");
    std::string out;
    put_u32(out, static_cast<std::uint32_t>(image.width()));
    put_u32(out, static_cast<std::uint32_t>(image.height()));
    put_u32(out, 3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const float f = static_cast<float>(image.at(x, y, c));
                char b[4];
                std::memcpy(b, &f, 4);
                out.append(b, 4);
            }
        }
    }
    return out;
}

std::string encode_embed_text_request(const std::string& text)
{
    std::string out;
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    return out;
}

Eigen::VectorXd decode_embedding(const std::string& body)
{
    if (body.empty() || body.size() % sizeof(float) != 0) throw OracleError("embedding reply has a bad size");
    Eigen::VectorXd v(static_cast<Eigen::Index>(body.size() / sizeof(float)));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        float f;
        std::memcpy(&f, body.data() + i * sizeof(float), sizeof(float));
        if (!std::isfinite(f)) throw OracleError("embedding reply contains a non-finite value");
        v[i] = f;
    }
    return v;
}

RemoteEmbedder::RemoteEmbedder(std::string url, std::chrono::milliseconds timeout, int retries)
    : url_(std::move(url)), timeout_(timeout), retries_(retries)
{
    if (retries < 0) throw ValidationError("remote embedder: retries must be non-negative");
    if (timeout.count() <= 0) throw ValidationError("remote embedder: timeout must be positive");
}

Eigen::VectorXd RemoteEmbedder::post(const std::string& path, const std::string& body)
{
    httplib::Client client(url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    std::string last_error;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        auto res = client.Post(path, body, "application/octet-stream");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            Eigen::VectorXd v = decode_embedding(res->body);
            if (dimension_ != 0 && v.size() != dimension_) throw OracleError("embedding dimension changed");
            dimension_ = static_cast<int>(v.size());
            return v;
        } catch (const OracleError& e) {
            last_error = e.what();
        }
    }
    throw OracleError("remote embedder at " + url_ + path + " failed after " + std::to_string(retries_ + 1) +
                      " attempts: " + last_error);
}

Eigen::VectorXd RemoteEmbedder::embed_image(const ImageBuffer& image)
{
    return post("/embed-image", encode_embed_image_request(image));
}

Eigen::VectorXd RemoteEmbedder::embed_text(const std::string& text)
{
    return post("/embed-text", encode_embed_text_request(text));
}

std::unique_ptr<EmbeddingProvider> make_embedder(const std::string& spec)
{
    if (spec == "toy") return std::make_unique<ToyEmbedder>();
    if (spec.rfind("remote:", 0) == 0 && spec.size() > 7) {
        return std::make_unique<RemoteEmbedder>(spec.substr(7), std::chrono::milliseconds(30000), 2);
    }
    throw ValidationError("unknown embedder '" + spec + "' (expected toy or remote:<url>)");
}

} // namespace gsedit
