// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#include <doctest.h>

// Eigen must precede httplib: resolv.h (pulled in by httplib) defines a
// `_res` macro that mangles Eigen's kernel signatures.
#include "matkit/errors.hpp"
#include "matkit/hashing.hpp"
#include "matkit/http_adapters.hpp"
#include "oracles.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <thread>

using namespace matkit;
using json = nlohmann::json;

namespace {

/// In-process model server speaking the documented JSON contract.
class FakeServer {
public:
    FakeServer() {
        server_.Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            const Image img = oracles::solid_image(body["width"], body["height"], 10, 200, 30);
            res.set_content(json{{"image_png", base64_encode(encode_png(img))}}.dump(),
                            "application/json");
        });
        server_.Post("/segment", [](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            const Image img = decode_image(base64_decode(body["image_png"]));
            BinaryMask mask(img.width, img.height);
            mask.set(1, 1, true);
            res.set_content(json{{"mask_png", base64_encode(encode_png(mask))}}.dump(),
                            "application/json");
        });
        server_.Post("/vision", [](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            const Image img = decode_image(base64_decode(body["image_png"]));
            std::vector<double> values;
            for (int i = 0; i < 2 * 2 * 3; ++i) values.push_back(i + img.width);
            res.set_content(json{{"features", values}}.dump(), "application/json");
        });
        server_.Post("/text", [](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            const std::string text = body["text"];
            res.set_content(
                json{{"embedding", {static_cast<double>(text.size()), 1.0, 2.0}}}.dump(),
                "application/json");
        });
        server_.Post("/describe", [](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            res.set_content(json{{"text", "served descriptor for " +
                                              body["instruction"].get<std::string>()}}.dump(),
                            "application/json");
        });
        server_.Post("/vlm", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(json{{"response", "It looks like metal."}}.dump(),
                            "application/json");
        });
        server_.Post("/boom", [](const httplib::Request&, httplib::Response& res) {
            res.status = 500;
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FakeServer() {
        server_.stop();
        thread_.join();
    }

    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port_) + path;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

} // namespace

TEST_CASE("http adapters speak the wire contract") {
    FakeServer server;

    HttpGenerationBackend gen(server.url("/generate"), {{"steps", "30"}});
    const Image img = gen.generate("a prompt", 5, 24, 16);
    CHECK(img.width == 24);
    CHECK(img.height == 16);
    CHECK(img.at(0, 0)[1] == 200);

    HttpSegmentationBackend seg(server.url("/segment"));
    const BinaryMask mask = seg.segment(img, "vase");
    CHECK(mask.width == 24);
    CHECK(mask.foreground_count() == 1);
    CHECK(mask.at(1, 1));

    HttpVisionEncoder vision(server.url("/vision"), 8, 2, 3);
    const PatchGrid grid = vision.encode(oracles::solid_image(8, 8, 0, 0, 0));
    CHECK(grid.features.rows() == 4);
    CHECK(grid.features(0, 0) == doctest::Approx(8.0)); // width echoed back

    HttpTextEncoder text(server.url("/text"), 3);
    const TextEmbedding emb = text.encode("hello");
    CHECK(emb(0) == doctest::Approx(5.0));

    HttpDescriptorGenerator desc(server.url("/describe"), "look closely");
    BinaryMask m(24, 16);
    m.set(0, 0, true);
    CHECK(desc.describe(img, m) == "served descriptor for look closely");

    HttpMaterialVlm vlm(server.url("/vlm"));
    CHECK(vlm.ask(img, m, "what material?") == "It looks like metal.");
}

TEST_CASE("http adapters surface server errors and contract violations") {
    FakeServer server;
    HttpGenerationBackend broken(server.url("/boom"), {});
    CHECK_THROWS_AS(broken.generate("p", 1, 8, 8), BackendError);

    HttpTextEncoder wrong_dim(server.url("/text"), 7); // server returns 3 values
    CHECK_THROWS_AS(wrong_dim.encode("hello"), BackendError);

    HttpVisionEncoder wrong_grid(server.url("/vision"), 8, 3, 3); // expects 27 values, gets 12
    CHECK_THROWS_AS(wrong_grid.encode(oracles::solid_image(8, 8, 0, 0, 0)), BackendError);

    HttpGenerationBackend unreachable("http://127.0.0.1:1/generate", {});
    CHECK_THROWS_AS(unreachable.generate("p", 1, 8, 8), BackendError);

    CHECK_THROWS_AS(HttpGenerationBackend("garbage", {}).generate("p", 1, 8, 8), ConfigError);
}
