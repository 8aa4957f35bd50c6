#include <cmath>
#include <cstring>
#include <map>
#include <random>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "gsedit/color.hpp"
#include "gsedit/edit.hpp"
#include "gsedit/error.hpp"
#include "gsedit/metrics.hpp"

#include <httplib.h>

using namespace gsedit;
using namespace gsedit::testing;

namespace {

// Images are looked up by their first pixel value, texts by string.
class LookupProvider final : public EmbeddingProvider {
public:
    std::string name() const override { return "lookup"; }
    int dimension() const override { return dim; }
    Eigen::VectorXd embed_image(const ImageBuffer& img) override { return images.at(img.data()[0]); }
    Eigen::VectorXd embed_text(const std::string& t) override { return texts.at(t); }

    int dim = 3;
    std::map<double, Eigen::VectorXd> images;
    std::map<std::string, Eigen::VectorXd> texts;
};

ImageBuffer tagged(double tag) { return ImageBuffer(2, 2, 3, tag); }

double scripted_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

// Naive toy image features for W, H divisible by 8 (block means, hard-coded bin split).
Eigen::VectorXd naive_toy_features(const ImageBuffer& img)
{
    Eigen::VectorXd f = Eigen::VectorXd::Zero(76);
    const int bw = img.width() / 8, bh = img.height() / 8;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const double lum = 0.2126 * img.at(x, y, 0) + 0.7152 * img.at(x, y, 1) + 0.0722 * img.at(x, y, 2);
            f[(y / bh) * 8 + x / bw] += lum / (bw * bh) / 8.0;
            const Eigen::Vector3d hsv = rgb_to_hsv({img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)});
            const double pos = hsv.x() / 30.0;
            const int lo = static_cast<int>(pos);
            f[64 + lo % 12] += (1.0 - (pos - lo)) * hsv.y() / img.pixel_count();
            f[64 + (lo + 1) % 12] += (pos - lo) * hsv.y() / img.pixel_count();
        }
    return f / f.norm();
}

std::vector<ImageBuffer> rig_renders(const Scene& scene, const CameraRig& rig)
{
    std::vector<ImageBuffer> out;
    for (const Camera& c : rig) out.push_back(render(scene, c));
    return out;
}

} // namespace

TEST_CASE("toy embedder")
{
    ToyEmbedder toy;
    CHECK(toy.dimension() == 76);

    ImageBuffer red(32, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) red.at(x, y, 0) = 1.0;
    CHECK(*cosine(toy.embed_image(red), toy.embed_text("red")) >= 0.5);

    std::mt19937_64 rng(1);
    const ImageBuffer noise = random_image(rng, 48, 40, 3, 0.0, 1.0);
    CHECK(toy.embed_image(noise) == toy.embed_image(noise));
    CHECK(toy.embed_text("a mammoth") == toy.embed_text("a mammoth"));
    CHECK(toy.embed_text("mammoth").norm() == doctest::Approx(1.0));

    const ImageBuffer smooth = random_image(rng, 64, 64, 3, 0.2, 0.8);
    const Eigen::VectorXd mine = toy.embed_image(smooth);
    const Eigen::VectorXd oracle = naive_toy_features(smooth);
    CHECK((mine - oracle).cwiseAbs().maxCoeff() < 1e-12);

    // One-pixel translation of a rendered object.
    const Scene ball = gray_sphere_scene(rng, 600, 0.5);
    const Camera cam(0.0, 0.0, 2.5, 49.0, 64, 64);
    HueShiftOracle to_red(0.0, 1.0);
    const ImageBuffer img = to_red.target(render(ball, cam), "");
    ImageBuffer shifted(64, 64, 3, 1.0);
    for (int y = 0; y < 64; ++y)
        for (int x = 1; x < 64; ++x)
            for (int c = 0; c < 3; ++c) shifted.at(x, y, c) = img.at(x - 1, y, c);
    CHECK(*cosine(toy.embed_image(img), toy.embed_image(shifted)) >= 0.99);

    const double to_red_text = *text_similarity(img, "red", toy);
    CHECK(to_red_text > 0.0);
    CHECK(to_red_text > *text_similarity(img, "blue", toy));
}

TEST_CASE("cosine metrics: exact examples")
{
    LookupProvider p;
    p.images[0.0] = Eigen::Vector3d(1, 0, 0);
    p.images[1.0] = Eigen::Vector3d(0, 2, 0);
    p.images[2.0] = Eigen::Vector3d(1, 0, 3);
    p.texts["a"] = Eigen::Vector3d(5, 5, 5);
    p.texts["b"] = Eigen::Vector3d(4, 7, 5);  // a - b = (1, -2, 0) = x - x_hat for images 0 and 1
    p.texts["c"] = Eigen::Vector3d(5, 5, 8);  // a - c = (0, 0, -3), orthogonal to (1, -2, 0)
    p.texts["neg"] = Eigen::Vector3d(-1, 0, 0);
    p.texts["zero"] = Eigen::Vector3d(0, 0, 0);

    CHECK(*directional_similarity(tagged(0.0), tagged(1.0), "a", "b", p) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(*directional_similarity(tagged(0.0), tagged(1.0), "a", "c", p) == doctest::Approx(0.0));
    CHECK(!directional_similarity(tagged(0.0), tagged(0.0), "a", "b", p).has_value());
    CHECK(!directional_similarity(tagged(0.0), tagged(1.0), "a", "a", p).has_value());

    CHECK(*text_similarity(tagged(0.0), "a", p) == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(*text_similarity(tagged(0.0), "neg", p) == -1.0);
    CHECK(!text_similarity(tagged(0.0), "zero", p).has_value());

    // Same edit offset on both frames.
    p.images[3.0] = Eigen::Vector3d(1, 2, 3);
    p.images[4.0] = Eigen::Vector3d(0, 4, 3);
    CHECK(*directional_consistency(tagged(0.0), tagged(3.0), tagged(1.0), tagged(4.0), p) ==
          doctest::Approx(1.0));
    CHECK(!directional_consistency(tagged(0.0), tagged(1.0), tagged(0.0), tagged(1.0), p).has_value());
}

TEST_CASE("metrics match scripted recomputation on toy fixtures")
{
    ToyEmbedder toy;
    std::mt19937_64 rng(2);
    const Scene gray = gray_sphere_scene(rng, 800, 0.5);
    RigSettings rs;
    rs.width = rs.height = 48;
    const CameraRig rig = build_camera_rig(rs);
    const std::vector<ImageBuffer> before = rig_renders(gray, rig);
    HueShiftOracle to_red(0.0, 1.0);
    std::vector<ImageBuffer> after;
    for (const auto& img : before) after.push_back(to_red.target(img, ""));

    const std::string src = "a gray sphere", dst = "a red sphere";
    const double sim = *directional_similarity(before[0], after[0], src, dst, toy);
    const double expect_sim = scripted_cosine(toy.embed_image(before[0]) - toy.embed_image(after[0]),
                                              toy.embed_text(src) - toy.embed_text(dst));
    CHECK(std::abs(sim - expect_sim) <= 1e-9);
    CHECK(sim > 0.0);

    const MetricReport r = evaluate_edit({&before, &after, src, dst}, toy);
    REQUIRE(r.clip_cons_per_pair.size() == 19);
    double cons = 0.0, text = 0.0, simsum = 0.0;
    for (std::size_t i = 0; i + 1 < before.size(); ++i) {
        cons += scripted_cosine(toy.embed_image(after[i]) - toy.embed_image(before[i]),
                                toy.embed_image(after[i + 1]) - toy.embed_image(before[i + 1]));
    }
    for (std::size_t i = 0; i < before.size(); ++i) {
        text += scripted_cosine(toy.embed_text(dst), toy.embed_image(after[i]));
        simsum += scripted_cosine(toy.embed_image(before[i]) - toy.embed_image(after[i]),
                                  toy.embed_text(src) - toy.embed_text(dst));
    }
    CHECK(std::abs(*r.clip_cons - cons / 19.0) <= 1e-9);
    CHECK(std::abs(*r.clip_text - text / 20.0) <= 1e-9);
    CHECK(std::abs(*r.clip_sim - simsum / 20.0) <= 1e-9);
    CHECK(std::abs(*r.clip_cons_per_pair[3] - *directional_consistency(before[3], before[4], after[3], after[4], toy)) <=
          1e-15);

    // No-op edit: offsets vanish, metrics are absent rather than zero.
    const MetricReport noop = evaluate_edit({&before, &before, src, dst}, toy);
    CHECK(!noop.clip_cons.has_value());
    CHECK(!noop.clip_sim.has_value());
    CHECK(noop.clip_text.has_value());
    CHECK(noop.to_json().find("\"clip_cons\": null") != std::string::npos);
}

TEST_CASE("cosine range, rescaling and symmetry invariants")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    auto random_vec = [&](int d) {
        Eigen::VectorXd v(d);
        for (int i = 0; i < d; ++i) v[i] = normal(rng);
        return v;
    };
    for (int draw = 0; draw < 1000; ++draw) {
        const int d = 2 + draw % 80;
        const Eigen::VectorXd a = random_vec(d), b = random_vec(d);
        const double c = *cosine(a, b);
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
        CHECK(*cosine(scale(rng) * a, scale(rng) * b) == doctest::Approx(c).epsilon(1e-12));

        LookupProvider p;
        p.dim = d;
        p.images[0.0] = a;
        p.images[1.0] = b;
        p.images[2.0] = random_vec(d);
        p.images[3.0] = random_vec(d);
        p.texts["t"] = random_vec(d);
        p.texts["u"] = random_vec(d);
        const double s1 = *directional_similarity(tagged(0.0), tagged(1.0), "t", "u", p);
        const double s2 = *directional_similarity(tagged(1.0), tagged(0.0), "u", "t", p);
        CHECK(s1 == s2);
        CHECK(std::abs(s1) <= 1.0);
        const double k = *directional_consistency(tagged(0.0), tagged(2.0), tagged(1.0), tagged(3.0), p);
        CHECK(std::abs(k) <= 1.0);
        CHECK(std::abs(*text_similarity(tagged(2.0), "t", p)) <= 1.0);

        // Rescaling every embedding of a provider leaves text similarity unchanged.
        LookupProvider q = p;
        for (auto& [key, v] : q.images) v *= scale(rng);
        for (auto& [key, v] : q.texts) v *= scale(rng);
        CHECK(*text_similarity(tagged(2.0), "t", q) == doctest::Approx(*text_similarity(tagged(2.0), "t", p)).epsilon(1e-12));
    }
}

TEST_CASE("metric report json")
{
    MetricReport r;
    r.clip_sim = 0.25;
    r.clip_sim_per_view = {0.25, std::nullopt};
    r.embedder = "toy";
    r.timings_s = {{"reconstruct", 1.5}, {"edit", 2.0}};
    const std::string with = r.to_json(true);
    const std::string without = r.to_json(false);
    CHECK(with.find("\"timings_s\"") != std::string::npos);
    CHECK(with.find("\"reconstruct\": 1.5") != std::string::npos);
    CHECK(without.find("timings_s") == std::string::npos);
    CHECK(without.find("\"clip_text\": null") != std::string::npos);
    CHECK(with.find("\"clip_sim\": 0.25") < with.find("\"clip_cons\""));
}

TEST_CASE("remote embedder")
{
    httplib::Server server;
    auto reply = [](const Eigen::VectorXd& v) {
        std::string out;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const float f = static_cast<float>(v[i]);
            out.append(reinterpret_cast<const char*>(&f), 4);
        }
        return out;
    };
    ToyEmbedder toy;
    server.Post("/embed-text", [&](const httplib::Request& req, httplib::Response& res) {
        std::uint32_t len = 0;
        std::memcpy(&len, req.body.data(), 4);
        res.set_content(reply(toy.embed_text(req.body.substr(4, len))), "application/octet-stream");
    });
    server.Post("/embed-image", [&](const httplib::Request& req, httplib::Response& res) {
        std::uint32_t hdr[3];
        std::memcpy(hdr, req.body.data(), 12);
        ImageBuffer img(static_cast<int>(hdr[0]), static_cast<int>(hdr[1]), 3);
        for (std::size_t i = 0; i < img.size(); ++i) {
            float f;
            std::memcpy(&f, req.body.data() + 12 + 4 * i, 4);
            img.data()[i] = f;
        }
        res.set_content(reply(toy.embed_image(img)), "application/octet-stream");
    });
    server.Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.set_content("abc", "text/plain"); });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    {
        RemoteEmbedder remote("http://127.0.0.1:" + std::to_string(port), std::chrono::milliseconds(2000), 1);
        const Eigen::VectorXd t = remote.embed_text("a red sphere");
        CHECK(remote.dimension() == 76);
        CHECK((t - toy.embed_text("a red sphere")).cwiseAbs().maxCoeff() < 1e-6);
        std::mt19937_64 rng(4);
        const ImageBuffer img = random_image(rng, 16, 8, 3, 0.0, 1.0);
        CHECK((remote.embed_image(img) - toy.embed_image(img)).cwiseAbs().maxCoeff() < 1e-5);
    }
    CHECK_THROWS_AS(decode_embedding("abc"), OracleError);
    CHECK_THROWS_AS(decode_embedding(""), OracleError);

    server.stop();
    th.join();
    RemoteEmbedder down("http://127.0.0.1:" + std::to_string(port), std::chrono::milliseconds(200), 1);
    CHECK_THROWS_AS(down.embed_text("x"), OracleError);

    CHECK(make_embedder("toy")->name() == "toy");
    CHECK(make_embedder("remote:http://localhost:1")->name() == "remote");
    CHECK_THROWS_AS(make_embedder("clip"), ValidationError);
}
