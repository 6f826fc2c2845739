#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crea/gateway.hpp"

namespace crea {

// First matching rule wins; an empty `contains` matches every prompt.
struct MockGenerationRule {
  std::string contains;
  std::optional<std::string> response;     // fixed reply
  std::optional<std::string> after_first;  // echo text after first marker
  std::optional<std::string> after_last;   // echo text after last marker
};

struct MockMaskRule {
  std::string contains;
  std::map<std::string, double> scores;  // returned verbatim
};

struct MockRules {
  int dimension = kDefaultEmbeddingDim;
  std::vector<MockGenerationRule> generation_rules;
  std::string generation_default;
  std::vector<MockMaskRule> mask_rules;
  // Routes ("generate", "mask_scores", "embed") that answer 500 for their
  // first N requests; exercises client retry paths.
  std::map<std::string, int> fail_first;
};

MockRules mock_rules_from_json_text(const std::string& text);
MockRules mock_rules_from_file(const std::filesystem::path& path);

// In-process deterministic backend serving /generate, /mask_scores and
// /embed. Identical requests always produce identical responses; /embed
// returns hash-seeded unit vectors.
class MockServer {
 public:
  explicit MockServer(MockRules rules);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds 127.0.0.1:<port> (0 picks a free port) and serves on a background
  // thread; returns the bound port.
  int start(int port = 0);
  void stop();
  int port() const;

  BackendDescriptor descriptor(BackendKind kind) const;
  long long request_count(const std::string& route) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// The deterministic vector /embed serves for a text; exposed so tests and
// fixtures can precompute expectations.
std::vector<double> mock_embedding(const std::string& input_text, int dim);

}  // namespace crea
