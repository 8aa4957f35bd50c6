#include <bit>
#include <cmath>
#include <cstring>

#include "gsedit/edit.hpp"
#include "gsedit/error.hpp"

namespace gsedit {
namespace {

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

template <typename T>
void put(std::string& out, T value)
{
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos)
{
    if (pos > in.size() || in.size() - pos < sizeof(T)) throw OracleError("wire: truncated message");
    T value;
    std::memcpy(&value, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

std::vector<float> take_floats(const std::string& in, std::size_t& pos, std::size_t count)
{
    if ((in.size() - pos) / sizeof(float) < count) throw OracleError("wire: truncated array");
    std::vector<float> out(count);
    std::memcpy(out.data(), in.data() + pos, count * sizeof(float));
    pos += count * sizeof(float);
    return out;
}

} // namespace

std::string encode_wire_request(const WireRequest& r)
{
    const std::size_t n = static_cast<std::size_t>(r.width) * r.height * r.channels;
    if (r.noisy.size() != n || r.condition.size() != n) {
        throw ValidationError("wire: latent arrays do not match the header");
    }
    std::string out;
    out.reserve(28 + r.prompt.size() + 2 * n * sizeof(float));
    put(out, r.width);
    put(out, r.height);
    put(out, r.channels);
    put(out, r.t);
    put(out, r.text_scale);
    put(out, r.image_scale);
    put(out, static_cast<std::uint32_t>(r.prompt.size()));
    out += r.prompt;
    out.append(reinterpret_cast<const char*>(r.noisy.data()), n * sizeof(float));
    out.append(reinterpret_cast<const char*>(r.condition.data()), n * sizeof(float));
    return out;
}

WireRequest decode_wire_request(const std::string& body)
{
    std::size_t pos = 0;
    WireRequest r;
    r.width = take<std::uint32_t>(body, pos);
    r.height = take<std::uint32_t>(body, pos);
    r.channels = take<std::uint32_t>(body, pos);
    r.t = take<float>(body, pos);
    r.text_scale = take<float>(body, pos);
    r.image_scale = take<float>(body, pos);
    const auto len = take<std::uint32_t>(body, pos);
    if (body.size() - pos < len) throw OracleError("wire: truncated prompt");
    r.prompt = body.substr(pos, len);
    pos += len;
    const std::size_t n = static_cast<std::size_t>(r.width) * r.height * r.channels;
    r.noisy = take_floats(body, pos, n);
    r.condition = take_floats(body, pos, n);
    if (pos != body.size()) throw OracleError("wire: trailing bytes in request");
    return r;
}

std::string encode_wire_response(const LatentImage& eps_hat)
{
    std::string out;
    out.reserve(eps_hat.size() * sizeof(float));
    for (double v : eps_hat.data()) put(out, static_cast<float>(v));
    return out;
}

LatentImage decode_wire_response(const std::string& body, int width, int height, int channels)
{
    LatentImage out(width, height, channels);
    if (body.size() != out.size() * sizeof(float)) {
        throw OracleError("wire: response has " + std::to_string(body.size()) + " bytes, expected " +
                          std::to_string(out.size() * sizeof(float)));
    }
    std::size_t pos = 0;
    const auto values = take_floats(body, pos, out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!std::isfinite(values[i])) throw OracleError("wire: non-finite value in response");
        out.data()[i] = values[i];
    }
    return out;
}

} // namespace gsedit
