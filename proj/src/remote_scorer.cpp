#include "httplib.h"
#include "json.hpp"
#include "sensel/error.hpp"
#include "sensel/scoring.hpp"

namespace sensel {

using nlohmann::json;

std::string score_request_body(std::string_view prompt, std::span<const std::string> continuations) {
  json doc = {{"prompt", std::string(prompt)},
              {"continuations", std::vector<std::string>(continuations.begin(), continuations.end())}};
  return doc.dump();
}

std::vector<double> parse_score_response(std::string_view body, std::size_t expected_arity) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("score response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("logprobs") || !doc.at("logprobs").is_array()) {
    throw ProtocolError("score response lacks a 'logprobs' array");
  }
  std::vector<double> out;
  for (const auto& v : doc.at("logprobs")) {
    if (!v.is_number()) throw ProtocolError("score response 'logprobs' must contain numbers");
    out.push_back(v.get<double>());
  }
  if (out.size() != expected_arity) {
    throw ProtocolError("score response has " + std::to_string(out.size()) + " logprobs, expected " +
                        std::to_string(expected_arity));
  }
  return out;
}

RemoteScorer::RemoteScorer(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (base_url_.empty()) throw ConfigError("scorer endpoint is empty");
}

std::vector<double> RemoteScorer::score(const ScoreRequest& request, std::span<const std::string> continuations) {
  // Split "scheme://host:port/prefix" into the client address and a path prefix.
  std::string origin = base_url_;
  std::string prefix;
  const auto scheme_end = base_url_.find("://");
  const auto path_start = base_url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start != std::string::npos) {
    origin = base_url_.substr(0, path_start);
    prefix = base_url_.substr(path_start);
  }

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);

  auto res = client.Post(prefix + "/v1/score", score_request_body(request.prompt, continuations), "application/json");
  if (!res) {
    throw TransportError("POST " + base_url_ + "/v1/score failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("POST " + base_url_ + "/v1/score returned HTTP " + std::to_string(res->status));
  }
  return parse_score_response(res->body, continuations.size());
}

}  // namespace sensel
