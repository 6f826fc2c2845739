#pragma once

#include <string>

#include "crea/runner.hpp"
#include "test_support.hpp"

namespace crea::testing {

// Rigged 3-class fixture: every query's precomputed embedding sits exactly on
// its gold class's corpus document, so k=1 retrieval always pairs a query with
// a correctly labeled demonstration. The mock rules decode "ruby" queries
// directly and otherwise echo the text after the first "Label:", which is
// empty for zero-shot prompts (abstention) and the demo's label for k>=1.
//
// Hand-derived expectations for n=50 (17 red / 17 green / 16 blue, 10 "ruby"
// cues on red):
//   zero-shot: red P=1, R=10/17 -> macro F1 = 20/81, accuracy = 0.2
//   k=1:       everything correct -> macro F1 = 1.0
inline constexpr double kZeroShotMacroF1 = 20.0 / 81.0;
inline constexpr double kZeroShotAccuracy = 0.2;

struct ClassificationFixture {
  std::filesystem::path corpus;
  std::filesystem::path eval_set;
  std::filesystem::path sidecar;
  std::filesystem::path template_file;
  std::string mock_rules_json;
  int n = 0;
};

inline std::string fixture_gold(int i) {
  switch (i % 3) {
    case 0:
      return "red";
    case 1:
      return "green";
    default:
      return "blue";
  }
}

inline ClassificationFixture write_classification_fixture(
    const std::filesystem::path& dir, int n = 50, bool labeled_corpus = true) {
  ClassificationFixture fx;
  fx.n = n;
  fx.corpus = dir / "corpus.jsonl";
  fx.eval_set = dir / "eval.jsonl";
  fx.sidecar = dir / "queries.jsonl";
  fx.template_file = dir / "template.json";

  const auto label_field = [&](const char* name) {
    return labeled_corpus ? "\"" + std::string(name) + "\"" : "null";
  };
  std::string corpus =
      R"({"label_set": ["red", "green", "blue"], "dimension": 4})"
      "\n";
  corpus += R"({"id": "d_red", "text": "garnet stone sample", "language": "en", "label": )" +
            label_field("red") + R"(, "embedding": [1.0, 0.0, 0.0, 0.0]})" + "\n";
  corpus += R"({"id": "d_green", "text": "emerald stone sample", "language": "en", "label": )" +
            label_field("green") + R"(, "embedding": [0.0, 1.0, 0.0, 0.0]})" + "\n";
  corpus += R"({"id": "d_blue", "text": "sapphire stone sample", "language": "en", "label": )" +
            label_field("blue") + R"(, "embedding": [0.0, 0.0, 1.0, 0.0]})" + "\n";
  write_file(fx.corpus, corpus);

  std::string eval_set;
  std::string sidecar;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "e%02d", i);
    const std::string gold = fixture_gold(i);
    std::string text = "sample text number " + std::to_string(i);
    if (gold == "red" && i < 30) text += " ruby gem";
    eval_set += std::string(R"({"id": ")") + id + R"(", "text": ")" + text +
                R"(", "context": null, "gold": ")" + gold + "\"}\n";
    const char* basis = gold == "red"   ? "[1.0, 0.0, 0.0, 0.0]"
                        : gold == "green" ? "[0.0, 1.0, 0.0, 0.0]"
                                          : "[0.0, 0.0, 1.0, 0.0]";
    sidecar += std::string(R"({"id": ")") + id + R"(", "embedding": )" + basis +
               "}\n";
  }
  write_file(fx.eval_set, eval_set);
  write_file(fx.sidecar, sidecar);

  write_file(fx.template_file, R"({
  "template_id": "fixture_cls_v1",
  "style": "autoregressive",
  "query_body": "Text: {text} Label:",
  "demo_body": "Text: {text} Label: {label}",
  "demo_separator": "\n"
})");

  fx.mock_rules_json = R"({
    "dimension": 4,
    "generate": {
      "rules": [
        {"contains": "ruby", "response": "red"},
        {"after_first": "Label:"}
      ],
      "default": ""
    }
  })";
  return fx;
}

inline ExperimentConfig fixture_config(const ClassificationFixture& fx,
                                       const std::string& endpoint, int k,
                                       const std::filesystem::path& output_dir) {
  ExperimentConfig config;
  config.task = TaskKind::classification;
  config.template_file = fx.template_file;
  config.k = k;
  config.retrieval_corpus = fx.corpus;
  config.eval_set = fx.eval_set;
  config.query_embeddings = fx.sidecar;
  config.labels = {"red", "green", "blue"};
  BackendDescriptor inference;
  inference.endpoint = endpoint;
  inference.kind = BackendKind::generation;
  inference.backoff = std::chrono::milliseconds(5);
  config.inference_backend = inference;
  config.output_dir = output_dir;
  return config;
}

}  // namespace crea::testing
