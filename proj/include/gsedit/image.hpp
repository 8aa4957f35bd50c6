#pragma once

#include <cstddef>
#include <vector>

namespace gsedit {

/// Row-major H x W x C image. Values are nominally in [0,1]; gradient images
/// reuse the type and may hold any finite value.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int x, int y, int c) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c) const { return data_[index(x, y, c)]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::size_t index(int x, int y, int c) const
    {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    bool same_shape(const ImageBuffer& other) const
    {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    /// Throws ValidationError if any value is NaN or infinite.
    void require_finite(const char* what) const;

    /// Copy of the first `n` channels (n <= channels()).
    ImageBuffer first_channels(int n) const;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Mean absolute difference over the first `channels` channels.
double mean_abs_error(const ImageBuffer& a, const ImageBuffer& b, int channels = 3);

/// Peak signal-to-noise ratio in dB over the first three channels, peak 1.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

} // namespace gsedit
