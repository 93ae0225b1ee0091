#pragma once

#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "wsa/error.hpp"
#include "wsa/target.hpp"
#include "wsa/tokenize.hpp"

namespace wsa {

// HTTP client for a remote target. POST {endpoint}/predict with
// {"text": ...}; response {"label": <int>, "scores": [...]}.
// Retries transport failures only; any well-formed HTTP response is final.
class RemoteTarget : public TargetModel {
 public:
  explicit RemoteTarget(std::string endpoint, int timeout_ms = 5000,
                        int retry_limit = 2)
      : timeout_ms_(timeout_ms), retry_limit_(retry_limit) {
    parse_endpoint(std::move(endpoint));
  }

  Prediction predict_text(const std::string& text) const {
    nlohmann::json body;
    body["text"] = text;
    std::string payload = body.dump();

    httplib::Result res;
    for (int attempt = 0; attempt <= retry_limit_; ++attempt) {
      httplib::Client cli(host_, port_);
      cli.set_connection_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
      cli.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
      res = cli.Post(path_prefix_ + "/predict", payload, "application/json");
      if (res) break;  // well-formed response, never retried
    }
    if (!res)
      throw query_error("remote target unreachable after " +
                        std::to_string(retry_limit_ + 1) + " attempts: " + host_ +
                        ":" + std::to_string(port_));
    if (res->status >= 400)
      throw query_error("remote target returned HTTP " + std::to_string(res->status),
                        res->status);

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw protocol_error(std::string("malformed remote response: ") + e.what());
    }
    if (!j.contains("label") || !j.contains("scores") ||
        !j["label"].is_number_integer() || !j["scores"].is_array())
      throw protocol_error("remote response missing label/scores");
    Prediction p;
    p.label = j["label"].get<int>();
    p.scores = j["scores"].get<std::vector<double>>();
    if (p.scores.empty() || p.label < 0 ||
        p.label >= static_cast<int>(p.scores.size()))
      throw protocol_error("remote response label out of range");
    classes_seen_ = static_cast<int>(p.scores.size());
    return p;
  }

  Prediction predict(const std::vector<std::string>& tokens) const override {
    if (tokens.empty()) throw domain_error("predict: empty token sequence");
    return predict_text(detokenize(tokens));
  }

  int num_classes() const override { return classes_seen_; }

  const std::string& host() const { return host_; }
  int port() const { return port_; }

 private:
  void parse_endpoint(std::string ep) {
    const std::string scheme = "http://";
    if (ep.rfind(scheme, 0) != 0)
      throw domain_error("only http:// endpoints supported: " + ep);
    ep = ep.substr(scheme.size());
    auto slash = ep.find('/');
    std::string hostport = ep.substr(0, slash);
    path_prefix_ = slash == std::string::npos ? "" : ep.substr(slash);
    while (!path_prefix_.empty() && path_prefix_.back() == '/')
      path_prefix_.pop_back();
    auto colon = hostport.find(':');
    if (colon == std::string::npos) {
      host_ = hostport;
      port_ = 80;
    } else {
      host_ = hostport.substr(0, colon);
      port_ = std::stoi(hostport.substr(colon + 1));
    }
    if (host_.empty()) throw domain_error("bad endpoint, no host");
  }

  std::string host_;
  int port_ = 80;
  std::string path_prefix_;
  int timeout_ms_;
  int retry_limit_;
  mutable int classes_seen_ = 0;
};

}  // namespace wsa
