#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include <httplib.h>

#include "helpers.hpp"
#include "wsa/remote.hpp"
#include "wsa/tokenize.hpp"

using namespace wsa;
using wsatest::TokenWeightTarget;

namespace {

// In-process echo server speaking the wire protocol, plus broken routes.
struct TestServer {
  TokenWeightTarget model;
  httplib::Server svr;
  int port = 0;
  std::thread thread;

  TestServer() {
    model.weights["wonderful"] = 4.0;
    model.bias = -2.0;
    svr.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
      auto j = nlohmann::json::parse(req.body);
      auto pred = model.predict(tokenize(j.at("text").get<std::string>()));
      nlohmann::json out;
      out["label"] = pred.label;
      out["scores"] = pred.scores;
      res.set_content(out.dump(), "application/json");
    });
    svr.Post("/broken/predict", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("this is not json", "application/json");
    });
    svr.Post("/error/predict", [](const httplib::Request&, httplib::Response& res) {
      res.status = 503;
      res.set_content("overloaded", "text/plain");
    });
    port = svr.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }

  ~TestServer() {
    svr.stop();
    thread.join();
  }

  std::string endpoint(const std::string& prefix = "") const {
    return "http://127.0.0.1:" + std::to_string(port) + prefix;
  }
};

}  // namespace

TEST_CASE("remote predictions match the model behind the endpoint") {
  TestServer server;
  RemoteTarget remote(server.endpoint());
  auto p = remote.predict({"wonderful", "film"});
  auto local = server.model.predict({"wonderful", "film"});
  CHECK(p.label == local.label);
  CHECK(p.scores == local.scores);
  CHECK(p.label == 1);
  CHECK(remote.predict({"plain", "film"}).label == 0);
  CHECK(remote.num_classes() == 2);
  CHECK_THROWS_AS(remote.predict({}), domain_error);
}

TEST_CASE("remote target honors a path prefix") {
  TestServer server;
  RemoteTarget remote(server.endpoint() + "/");
  CHECK(remote.predict({"wonderful"}).label == 1);
}

TEST_CASE("malformed response raises a protocol error") {
  TestServer server;
  RemoteTarget remote(server.endpoint("/broken"));
  CHECK_THROWS_AS(remote.predict({"x"}), protocol_error);
}

TEST_CASE("HTTP errors raise a query error carrying the status") {
  TestServer server;
  RemoteTarget remote(server.endpoint("/error"));
  try {
    remote.predict({"x"});
    FAIL("expected query_error");
  } catch (const query_error& e) {
    CHECK(e.http_status == 503);
  }
}

TEST_CASE("unreachable endpoints raise a query error after retries") {
  RemoteTarget remote("http://127.0.0.1:1", /*timeout_ms=*/200, /*retry_limit=*/1);
  CHECK_THROWS_AS(remote.predict({"x"}), query_error);
}

TEST_CASE("endpoint parsing") {
  RemoteTarget r1("http://example.com:8080/api");
  CHECK(r1.host() == "example.com");
  CHECK(r1.port() == 8080);
  RemoteTarget r2("http://example.com");
  CHECK(r2.port() == 80);
  CHECK_THROWS_AS(RemoteTarget("ftp://x"), domain_error);
}
