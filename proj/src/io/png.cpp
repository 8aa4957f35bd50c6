#include <algorithm>
#include <cmath>
#include <cstdint>

#include <png.h>

#include "gsedit/error.hpp"
#include "gsedit/io.hpp"

namespace gsedit {

void write_png(const ImageBuffer& image, const std::filesystem::path& path)
{
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    switch (image.channels()) {
    case 1: png.format = PNG_FORMAT_GRAY; break;
    case 3: png.format = PNG_FORMAT_RGB; break;
    case 4: png.format = PNG_FORMAT_RGBA; break;
    default: throw ValidationError("write_png: need 1, 3 or 4 channels");
    }
    if (image.empty()) throw ValidationError("write_png: empty image");
    std::vector<std::uint8_t> bytes(image.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::isfinite(image.data()[i]) ? std::clamp(image.data()[i], 0.0, 1.0) : 0.0;
        bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw Error("cannot write " + path.string() + ": " + msg);
    }
}

ImageBuffer read_png(const std::filesystem::path& path)
{
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw ValidationError("cannot read PNG " + path.string() + ": " + png.message);
    }
    const bool alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    png.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw ValidationError("cannot decode PNG " + path.string() + ": " + msg);
    }
    ImageBuffer out(static_cast<int>(png.width), static_cast<int>(png.height), alpha ? 4 : 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) out.data()[i] = bytes[i] / 255.0;
    return out;
}

} // namespace gsedit
