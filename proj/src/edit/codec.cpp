#include <string>

#include "gsedit/edit.hpp"
#include "gsedit/error.hpp"

namespace gsedit {

LatentImage IdentityCodec::encode(const ImageBuffer& image) const
{
    if (image.channels() < 3) throw ValidationError("codec: image needs RGB");
    return image.channels() == 3 ? image : image.first_channels(3);
}

ImageBuffer IdentityCodec::decode(const LatentImage& latent) const { return latent; }

ImageBuffer IdentityCodec::encode_backward(const LatentImage& grad, int width, int height) const
{
    if (grad.width() != width || grad.height() != height || grad.channels() != 3) {
        throw ValidationError("codec: gradient shape does not match the image");
    }
    return grad;
}

DownsampleCodec::DownsampleCodec(int factor) : factor_(factor)
{
    if (factor < 1) throw ValidationError("downsample codec: factor must be positive");
}

LatentImage DownsampleCodec::encode(const ImageBuffer& image) const
{
    if (image.channels() < 3) throw ValidationError("codec: image needs RGB");
    if (image.width() % factor_ || image.height() % factor_) {
        throw ValidationError("downsample codec: image size must be a multiple of the factor");
    }
    const int w = image.width() / factor_, h = image.height() / factor_;
    const double inv = 1.0 / (factor_ * factor_);
    LatentImage out(w, h, 3, 0.0);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) out.at(x / factor_, y / factor_, c) += inv * image.at(x, y, c);
        }
    }
    return out;
}

ImageBuffer DownsampleCodec::decode(const LatentImage& latent) const
{
    ImageBuffer out(latent.width() * factor_, latent.height() * factor_, latent.channels());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int c = 0; c < latent.channels(); ++c) {
                out.at(x, y, c) = latent.at(x / factor_, y / factor_, c);
            }
        }
    }
    return out;
}

ImageBuffer DownsampleCodec::encode_backward(const LatentImage& grad, int width, int height) const
{
    if (grad.width() * factor_ != width || grad.height() * factor_ != height || grad.channels() != 3) {
        throw ValidationError("codec: gradient shape does not match the image");
    }
    const double inv = 1.0 / (factor_ * factor_);
    ImageBuffer out(width, height, 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = inv * grad.at(x / factor_, y / factor_, c);
        }
    }
    return out;
}

std::unique_ptr<ImageCodec> make_codec(const std::string& spec)
{
    if (spec == "identity") return std::make_unique<IdentityCodec>();
    if (spec == "downsample") return std::make_unique<DownsampleCodec>(8);
    const std::string prefix = "downsample:";
    if (spec.rfind(prefix, 0) == 0) {
        try {
            std::size_t used = 0;
            const int f = std::stoi(spec.substr(prefix.size()), &used);
            if (used == spec.size() - prefix.size()) return std::make_unique<DownsampleCodec>(f);
        } catch (const std::logic_error&) {
        }
    }
    throw ValidationError("unknown codec '" + spec + "'");
}

} // namespace gsedit
