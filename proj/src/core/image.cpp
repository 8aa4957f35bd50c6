#include "gsedit/image.hpp"

#include <cmath>
#include <limits>

#include "gsedit/error.hpp"

namespace gsedit {

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels)
{
    if (width < 0 || height < 0 || channels <= 0) {
        throw ValidationError("image dimensions must be non-negative with at least one channel");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

void ImageBuffer::require_finite(const char* what) const
{
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw ValidationError(std::string(what) + " contains non-finite values");
        }
    }
}

ImageBuffer ImageBuffer::first_channels(int n) const
{
    if (n > channels_) {
        throw ValidationError("requested more channels than the image has");
    }
    ImageBuffer out(width_, height_, n);
    for (std::size_t p = 0; p < pixel_count(); ++p) {
        for (int c = 0; c < n; ++c) {
            out.data_[p * n + c] = data_[p * channels_ + c];
        }
    }
    return out;
}

double mean_abs_error(const ImageBuffer& a, const ImageBuffer& b, int channels)
{
    if (a.width() != b.width() || a.height() != b.height() || a.channels() < channels ||
        b.channels() < channels) {
        throw ValidationError("mean_abs_error: image shapes differ");
    }
    double sum = 0.0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            for (int c = 0; c < channels; ++c) {
                sum += std::abs(a.at(x, y, c) - b.at(x, y, c));
            }
        }
    }
    return sum / (static_cast<double>(a.pixel_count()) * channels);
}

double psnr(const ImageBuffer& a, const ImageBuffer& b)
{
    if (a.width() != b.width() || a.height() != b.height() || a.channels() < 3 ||
        b.channels() < 3) {
        throw ValidationError("psnr: image shapes differ");
    }
    double sum = 0.0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                sum += d * d;
            }
        }
    }
    const double mse = sum / (static_cast<double>(a.pixel_count()) * 3);
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return -10.0 * std::log10(mse);
}

} // namespace gsedit
