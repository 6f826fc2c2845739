#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "crea/embedding.hpp"
#include "crea/error.hpp"

namespace crea {

enum class TaskKind { classification, summarization, qa };

TaskKind task_kind_from_string(std::string_view name);
std::string_view to_string(TaskKind task);

// Ordered set of class names; position is the label id.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name_of(std::size_t id) const { return names_.at(id); }
  bool contains(std::string_view name) const;
  // Throws ValidationError for unknown names.
  std::size_t id_of(std::string_view name) const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> names_;
};

// One high-resource-language retrieval candidate.
struct CorpusDocument {
  std::string id;
  std::string text;
  std::string language;
  std::optional<std::string> label;
  std::optional<EmbeddingVector> embedding;
};

// Immutable after load; safe for concurrent reads.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::optional<LabelSet> labels, std::optional<int> dimension,
         std::vector<CorpusDocument> docs);

  const std::optional<LabelSet>& label_set() const { return labels_; }
  std::optional<int> dimension() const { return dimension_; }
  const std::vector<CorpusDocument>& documents() const { return docs_; }
  const CorpusDocument* find(std::string_view id) const;
  std::size_t size() const { return docs_.size(); }

 private:
  std::optional<LabelSet> labels_;
  std::optional<int> dimension_;
  std::vector<CorpusDocument> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Query or eval item: classification/summarization input, or a QA question
// with its context. gold holds one entry except for QA alternatives.
struct EvalExample {
  std::string id;
  std::string text;
  std::optional<std::string> context;
  std::vector<std::string> gold;

  const std::string& gold_single() const { return gold.front(); }
};

// Line-delimited corpus file: a header object
// {"label_set": [str]|null, "dimension": int|null} followed by one record
// {"id","text","language","label","embedding"} per line. Any error aborts the
// load with the offending line number; no partial corpus is returned.
Corpus load_corpus(const std::filesystem::path& path,
                   std::optional<int> expected_dim = std::nullopt);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Sets the embedding of every mapped id; unmapped documents are unchanged.
Corpus attach_embeddings(Corpus corpus,
                         const std::map<std::string, EmbeddingVector>& vectors);

// Eval-set file: one {"id","text","context","gold"} record per line, kept in
// file order. Gold shape is validated against the task kind; label membership
// is checked when a LabelSet is supplied.
std::vector<EvalExample> load_eval_set(
    const std::filesystem::path& path, TaskKind task,
    const std::optional<LabelSet>& labels = std::nullopt);

// Sidecar of precomputed vectors: {"id": str, "embedding": [float]} per line.
std::map<std::string, EmbeddingVector> load_embedding_sidecar(
    const std::filesystem::path& path,
    std::optional<int> expected_dim = std::nullopt);

}  // namespace crea
