#include "gsedit/edit.hpp"
#include "gsedit/error.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro breaks Eigen's headers.
#include <httplib.h>

namespace gsedit {
namespace {

std::vector<float> to_floats(const LatentImage& img)
{
    return {img.data().begin(), img.data().end()};
}

} // namespace

RemoteOracle::RemoteOracle(std::string url, std::chrono::milliseconds timeout, int retries)
    : url_(std::move(url)), timeout_(timeout), retries_(retries)
{
    if (retries < 0) throw ValidationError("remote oracle: retries must be non-negative");
    if (timeout.count() <= 0) throw ValidationError("remote oracle: timeout must be positive");
}

LatentImage RemoteOracle::predict_noise(const OracleRequest& request)
{
    if (!request.noisy || !request.condition) throw OracleError("remote oracle: missing latents");
    const LatentImage& zt = *request.noisy;
    if (!zt.same_shape(*request.condition)) {
        throw OracleError("remote oracle: latent and condition shapes differ");
    }
    WireRequest wire;
    wire.width = static_cast<std::uint32_t>(zt.width());
    wire.height = static_cast<std::uint32_t>(zt.height());
    wire.channels = static_cast<std::uint32_t>(zt.channels());
    wire.t = static_cast<float>(request.t);
    wire.text_scale = static_cast<float>(request.text_scale);
    wire.image_scale = static_cast<float>(request.image_scale);
    wire.prompt = request.prompt;
    wire.noisy = to_floats(zt);
    wire.condition = to_floats(*request.condition);
    const std::string body = encode_wire_request(wire);

    httplib::Client client(url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    std::string last_error;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        auto res = client.Post("/edit-noise", body, "application/octet-stream");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            return decode_wire_response(res->body, zt.width(), zt.height(), zt.channels());
        } catch (const OracleError& e) {
            last_error = e.what();
        }
    }
    throw OracleError("remote oracle at " + url_ + " failed after " + std::to_string(retries_ + 1) +
                      " attempts: " + last_error);
}

} // namespace gsedit
