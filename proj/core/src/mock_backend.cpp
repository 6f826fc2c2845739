#include "crea/mock_backend.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "crea/hash.hpp"
#include "httplib.h"
#include "json.hpp"

namespace crea {

using nlohmann::json;

MockRules mock_rules_from_json_text(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ValidationError("malformed mock rules JSON");
  }

  MockRules rules;
  if (doc.contains("dimension")) rules.dimension = doc["dimension"].get<int>();
  if (rules.dimension < 1) {
    throw ValidationError("mock rules: dimension must be positive");
  }

  if (doc.contains("generate")) {
    const json& gen = doc["generate"];
    for (const auto& r : gen.value("rules", json::array())) {
      MockGenerationRule rule;
      rule.contains = r.value("contains", std::string{});
      if (r.contains("response")) rule.response = r["response"].get<std::string>();
      if (r.contains("after_first")) {
        rule.after_first = r["after_first"].get<std::string>();
      }
      if (r.contains("after_last")) {
        rule.after_last = r["after_last"].get<std::string>();
      }
      if (!rule.response && !rule.after_first && !rule.after_last) {
        throw ValidationError("mock generate rule has no action");
      }
      rules.generation_rules.push_back(std::move(rule));
    }
    rules.generation_default = gen.value("default", std::string{});
  }

  if (doc.contains("mask_scores")) {
    for (const auto& r : doc["mask_scores"].value("rules", json::array())) {
      MockMaskRule rule;
      rule.contains = r.value("contains", std::string{});
      if (!r.contains("scores") || !r["scores"].is_object()) {
        throw ValidationError("mock mask rule needs a scores object");
      }
      for (const auto& [token, value] : r["scores"].items()) {
        rule.scores[token] = value.get<double>();
      }
      rules.mask_rules.push_back(std::move(rule));
    }
  }

  if (doc.contains("fail_first")) {
    for (const auto& [route, n] : doc["fail_first"].items()) {
      rules.fail_first[route] = n.get<int>();
    }
  }
  return rules;
}

MockRules mock_rules_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open mock rules: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return mock_rules_from_json_text(text);
}

std::vector<double> mock_embedding(const std::string& input_text, int dim) {
  std::uint64_t state = fnv1a64(input_text);
  std::vector<double> values(dim);
  double norm = 0.0;
  for (int i = 0; i < dim; ++i) {
    const std::uint64_t bits = splitmix64(state);
    const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0,1)
    values[i] = 2.0 * unit - 1.0;
    norm += values[i] * values[i];
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) {  // astronomically unlikely; keep the vector usable
    values[0] = 1.0;
    norm = 1.0;
  }
  for (auto& v : values) v /= norm;
  return values;
}

struct MockServer::Impl {
  MockRules rules;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<long long> count_generate{0};
  std::atomic<long long> count_mask{0};
  std::atomic<long long> count_embed{0};
  std::map<std::string, std::atomic<int>> remaining_failures;

  explicit Impl(MockRules r) : rules(std::move(r)) {
    for (const auto& [route, n] : rules.fail_first) {
      remaining_failures[route] = n;
    }
    setup_routes();
  }

  bool inject_failure(const std::string& route, httplib::Response& res) {
    auto it = remaining_failures.find(route);
    if (it == remaining_failures.end()) return false;
    int current = it->second.load();
    while (current > 0) {
      if (it->second.compare_exchange_weak(current, current - 1)) {
        res.status = 500;
        res.set_content(R"({"error":"injected failure"})", "application/json");
        return true;
      }
    }
    return false;
  }

  static void bad_request(httplib::Response& res, const std::string& message) {
    json err;
    err["error"] = message;
    res.status = 400;
    res.set_content(err.dump(), "application/json");
  }

  static json parse_body(const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      bad_request(res, "body is not a JSON object");
      return json();
    }
    return body;
  }

  void setup_routes() {
    server.Post("/generate", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      count_generate.fetch_add(1);
      if (inject_failure("generate", res)) return;
      const json body = parse_body(req, res);
      if (res.status == 400) return;
      if (!body.contains("prompt") || !body["prompt"].is_string() ||
          body["prompt"].get<std::string>().empty()) {
        return bad_request(res, "prompt must be a non-empty string");
      }
      if (body.contains("max_new_tokens") &&
          (!body["max_new_tokens"].is_number_integer() ||
           body["max_new_tokens"].get<int>() < 1)) {
        return bad_request(res, "max_new_tokens must be >= 1");
      }
      const std::string prompt = body["prompt"].get<std::string>();

      std::string reply = rules.generation_default;
      for (const auto& rule : rules.generation_rules) {
        if (!rule.contains.empty() &&
            prompt.find(rule.contains) == std::string::npos) {
          continue;
        }
        if (rule.response) {
          reply = *rule.response;
        } else if (rule.after_first) {
          const std::size_t pos = prompt.find(*rule.after_first);
          reply = pos == std::string::npos
                      ? std::string{}
                      : prompt.substr(pos + rule.after_first->size());
        } else if (rule.after_last) {
          const std::size_t pos = prompt.rfind(*rule.after_last);
          reply = pos == std::string::npos
                      ? std::string{}
                      : prompt.substr(pos + rule.after_last->size());
        }
        break;
      }
      json out;
      out["text"] = reply;
      res.set_content(out.dump(), "application/json");
    });

    server.Post("/mask_scores", [this](const httplib::Request& req,
                                       httplib::Response& res) {
      count_mask.fetch_add(1);
      if (inject_failure("mask_scores", res)) return;
      const json body = parse_body(req, res);
      if (res.status == 400) return;
      if (!body.contains("text") || !body["text"].is_string()) {
        return bad_request(res, "text must be a string");
      }
      if (!body.contains("candidates") || !body["candidates"].is_array() ||
          body["candidates"].empty()) {
        return bad_request(res, "candidates must be a non-empty array");
      }
      const std::string text = body["text"].get<std::string>();
      const std::string marker = body.value("mask_marker", "[MASK]");

      std::size_t markers = 0;
      std::size_t pos = 0;
      while ((pos = text.find(marker, pos)) != std::string::npos) {
        ++markers;
        pos += marker.size();
      }
      if (markers != 1) {
        return bad_request(res, "text must contain exactly one mask marker");
      }

      json scores = json::object();
      bool matched = false;
      for (const auto& rule : rules.mask_rules) {
        if (!rule.contains.empty() &&
            text.find(rule.contains) == std::string::npos) {
          continue;
        }
        for (const auto& [token, value] : rule.scores) scores[token] = value;
        matched = true;
        break;
      }
      if (!matched) {
        // Deterministic per (text, candidate) score in [0,1).
        for (const auto& candidate : body["candidates"]) {
          const std::string token = candidate.get<std::string>();
          const std::uint64_t h = fnv1a64(token, fnv1a64(text) ^ 0x9e3779b9ull);
          scores[token] = static_cast<double>(h >> 11) * 0x1.0p-53;
        }
      }
      json out;
      out["scores"] = scores;
      res.set_content(out.dump(), "application/json");
    });

    server.Post("/embed", [this](const httplib::Request& req,
                                 httplib::Response& res) {
      count_embed.fetch_add(1);
      if (inject_failure("embed", res)) return;
      const json body = parse_body(req, res);
      if (res.status == 400) return;
      if (!body.contains("texts") || !body["texts"].is_array()) {
        return bad_request(res, "texts must be an array");
      }
      json vectors = json::array();
      for (const auto& t : body["texts"]) {
        if (!t.is_string()) return bad_request(res, "texts must hold strings");
        vectors.push_back(mock_embedding(t.get<std::string>(), rules.dimension));
      }
      json out;
      out["vectors"] = vectors;
      out["dimension"] = rules.dimension;
      res.set_content(out.dump(), "application/json");
    });
  }
};

MockServer::MockServer(MockRules rules)
    : impl_(std::make_unique<Impl>(std::move(rules))) {}

MockServer::~MockServer() { stop(); }

int MockServer::start(int port) {
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  } else {
    if (!impl_->server.bind_to_port("127.0.0.1", port)) {
      throw Error("mock server: cannot bind port " + std::to_string(port));
    }
    impl_->port = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void MockServer::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

int MockServer::port() const { return impl_->port; }

BackendDescriptor MockServer::descriptor(BackendKind kind) const {
  BackendDescriptor backend;
  backend.endpoint = "http://127.0.0.1:" + std::to_string(impl_->port);
  backend.kind = kind;
  backend.timeout = std::chrono::milliseconds(5000);
  backend.retry_budget = 2;
  backend.backoff = std::chrono::milliseconds(10);
  return backend;
}

long long MockServer::request_count(const std::string& route) const {
  if (route == "generate") return impl_->count_generate.load();
  if (route == "mask_scores") return impl_->count_mask.load();
  if (route == "embed") return impl_->count_embed.load();
  throw ValidationError("unknown route: " + route);
}

}  // namespace crea
