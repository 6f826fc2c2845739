#include "crea/corpus.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "json.hpp"

namespace crea {

using nlohmann::json;

TaskKind task_kind_from_string(std::string_view name) {
  if (name == "classification") return TaskKind::classification;
  if (name == "summarization") return TaskKind::summarization;
  if (name == "qa") return TaskKind::qa;
  throw ValidationError("unknown task kind: " + std::string(name));
}

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::classification:
      return "classification";
    case TaskKind::summarization:
      return "summarization";
    case TaskKind::qa:
      return "qa";
  }
  return "?";
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& name : names_) {
    if (name.empty()) throw ValidationError("label names must be non-empty");
    if (!seen.insert(name).second) {
      throw ValidationError("duplicate label name: " + name);
    }
  }
}

bool LabelSet::contains(std::string_view name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t LabelSet::id_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ValidationError("unknown label name: " + std::string(name));
}

Corpus::Corpus(std::optional<LabelSet> labels, std::optional<int> dimension,
               std::vector<CorpusDocument> docs)
    : labels_(std::move(labels)),
      dimension_(dimension),
      docs_(std::move(docs)) {
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!by_id_.emplace(docs_[i].id, i).second) {
      throw ValidationError("duplicate document id: " + docs_[i].id);
    }
  }
}

const CorpusDocument* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &docs_[it->second];
}

namespace {

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line,
                          const std::string& what) {
  throw ValidationError(path.string() + ":" + std::to_string(line) + ": " +
                        what);
}

json parse_line(const std::filesystem::path& path, std::size_t line_no,
                const std::string& line) {
  json record = json::parse(line, nullptr, false);
  if (record.is_discarded() || !record.is_object()) {
    fail_at(path, line_no, "malformed record (not a JSON object)");
  }
  return record;
}

EmbeddingVector parse_embedding(const std::filesystem::path& path,
                                std::size_t line_no, const json& arr) {
  EmbeddingVector vec;
  vec.values.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) fail_at(path, line_no, "embedding holds a non-number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      fail_at(path, line_no, "embedding holds a non-finite value");
    }
    vec.values.push_back(x);
  }
  return vec;
}

std::string require_string(const std::filesystem::path& path,
                           std::size_t line_no, const json& record,
                           const char* key) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    fail_at(path, line_no, std::string("missing or non-string \"") + key +
                               "\" field");
  }
  return it->get<std::string>();
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path,
                   std::optional<int> expected_dim) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file: " + path.string());

  std::string line;
  std::size_t line_no = 0;

  // Header line.
  if (!std::getline(in, line)) {
    throw ValidationError(path.string() + ": empty corpus file (no header)");
  }
  ++line_no;
  const json header = parse_line(path, line_no, line);
  if (header.contains("id") || header.contains("text")) {
    fail_at(path, line_no,
            "first line looks like a document record; expected the corpus "
            "header {\"label_set\", \"dimension\"}");
  }

  std::optional<LabelSet> labels;
  if (auto it = header.find("label_set"); it != header.end() && !it->is_null()) {
    if (!it->is_array()) fail_at(path, line_no, "label_set must be an array");
    labels = LabelSet(it->get<std::vector<std::string>>());
  }
  std::optional<int> dimension = expected_dim;
  if (auto it = header.find("dimension"); it != header.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<int>() <= 0) {
      fail_at(path, line_no, "dimension must be a positive integer");
    }
    const int declared = it->get<int>();
    if (expected_dim && *expected_dim != declared) {
      fail_at(path, line_no,
              "declared dimension " + std::to_string(declared) +
                  " does not match expected " + std::to_string(*expected_dim));
    }
    dimension = declared;
  }

  std::vector<CorpusDocument> docs;
  std::unordered_map<std::string, std::size_t> first_line_of;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json record = parse_line(path, line_no, line);

    CorpusDocument doc;
    doc.id = require_string(path, line_no, record, "id");
    doc.text = require_string(path, line_no, record, "text");
    doc.language = require_string(path, line_no, record, "language");
    if (doc.text.empty()) fail_at(path, line_no, "empty text");

    if (auto prev = first_line_of.find(doc.id); prev != first_line_of.end()) {
      fail_at(path, line_no, "duplicate id \"" + doc.id + "\"");
    }
    first_line_of.emplace(doc.id, line_no);

    if (auto it = record.find("label"); it != record.end() && !it->is_null()) {
      if (!it->is_string()) fail_at(path, line_no, "label must be a string");
      doc.label = it->get<std::string>();
      if (labels && !labels->contains(*doc.label)) {
        fail_at(path, line_no, "unknown label name \"" + *doc.label + "\"");
      }
    }

    if (auto it = record.find("embedding");
        it != record.end() && !it->is_null()) {
      if (!it->is_array()) fail_at(path, line_no, "embedding must be an array");
      EmbeddingVector vec = parse_embedding(path, line_no, *it);
      if (vec.dim() == 0) fail_at(path, line_no, "empty embedding");
      if (!dimension) {
        dimension = vec.dim();  // first embedded record fixes the dimension
      } else if (vec.dim() != *dimension) {
        fail_at(path, line_no,
                "dimension mismatch: vector has " + std::to_string(vec.dim()) +
                    " components, corpus dimension is " +
                    std::to_string(*dimension));
      }
      doc.embedding = std::move(vec);
    }
    docs.push_back(std::move(doc));
  }

  return Corpus(std::move(labels), dimension, std::move(docs));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValidationError("cannot open file for writing: " + path.string());
  }
  json header;
  header["label_set"] =
      corpus.label_set() ? json(corpus.label_set()->names()) : json(nullptr);
  header["dimension"] =
      corpus.dimension() ? json(*corpus.dimension()) : json(nullptr);
  out << header.dump() << "\n";

  for (const auto& doc : corpus.documents()) {
    json record;
    record["id"] = doc.id;
    record["text"] = doc.text;
    record["language"] = doc.language;
    record["label"] = doc.label ? json(*doc.label) : json(nullptr);
    record["embedding"] =
        doc.embedding ? json(doc.embedding->values) : json(nullptr);
    out << record.dump() << "\n";
  }
  if (!out) throw Error("write failed: " + path.string());
}

Corpus attach_embeddings(
    Corpus corpus, const std::map<std::string, EmbeddingVector>& vectors) {
  std::optional<int> dimension = corpus.dimension();
  std::vector<CorpusDocument> docs = corpus.documents();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < docs.size(); ++i) index.emplace(docs[i].id, i);

  for (const auto& [id, vec] : vectors) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw ValidationError("attach_embeddings: unknown id \"" + id + "\"");
    }
    if (vec.dim() == 0) {
      throw ValidationError("attach_embeddings: empty vector for \"" + id +
                            "\"");
    }
    if (!dimension) {
      dimension = vec.dim();
    } else if (vec.dim() != *dimension) {
      throw ValidationError(
          "attach_embeddings: dimension mismatch for \"" + id + "\": " +
          std::to_string(vec.dim()) + " vs " + std::to_string(*dimension));
    }
    docs[it->second].embedding = vec;
  }
  return Corpus(corpus.label_set(), dimension, std::move(docs));
}

std::vector<EvalExample> load_eval_set(const std::filesystem::path& path,
                                       TaskKind task,
                                       const std::optional<LabelSet>& labels) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open eval set: " + path.string());

  std::vector<EvalExample> examples;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json record = parse_line(path, line_no, line);

    EvalExample ex;
    ex.id = require_string(path, line_no, record, "id");
    ex.text = require_string(path, line_no, record, "text");
    if (!seen_ids.insert(ex.id).second) {
      fail_at(path, line_no, "duplicate id \"" + ex.id + "\"");
    }
    if (auto it = record.find("context");
        it != record.end() && !it->is_null()) {
      if (!it->is_string()) fail_at(path, line_no, "context must be a string");
      ex.context = it->get<std::string>();
    }

    auto gold_it = record.find("gold");
    if (gold_it == record.end() || gold_it->is_null()) {
      fail_at(path, line_no, "missing gold field");
    }
    if (gold_it->is_string()) {
      ex.gold.push_back(gold_it->get<std::string>());
    } else if (gold_it->is_array()) {
      if (task != TaskKind::qa) {
        fail_at(path, line_no, "gold must be a single string for this task");
      }
      for (const auto& g : *gold_it) {
        if (!g.is_string()) fail_at(path, line_no, "gold entries must be strings");
        ex.gold.push_back(g.get<std::string>());
      }
      if (ex.gold.empty()) fail_at(path, line_no, "gold list is empty");
    } else {
      fail_at(path, line_no, "gold must be a string or list of strings");
    }

    switch (task) {
      case TaskKind::classification:
        if (ex.gold_single().empty()) fail_at(path, line_no, "empty gold label");
        if (labels && !labels->contains(ex.gold_single())) {
          fail_at(path, line_no,
                  "gold label \"" + ex.gold_single() + "\" not in label set");
        }
        break;
      case TaskKind::summarization:
        if (ex.gold_single().empty()) {
          fail_at(path, line_no, "empty reference summary");
        }
        break;
      case TaskKind::qa:
        if (!ex.context || ex.context->empty()) {
          fail_at(path, line_no, "QA example missing context");
        }
        for (const auto& g : ex.gold) {
          if (g.empty()) fail_at(path, line_no, "empty gold answer");
        }
        break;
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::map<std::string, EmbeddingVector> load_embedding_sidecar(
    const std::filesystem::path& path, std::optional<int> expected_dim) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open embedding sidecar: " + path.string());
  }
  std::map<std::string, EmbeddingVector> vectors;
  std::optional<int> dimension = expected_dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json record = parse_line(path, line_no, line);
    std::string id = require_string(path, line_no, record, "id");
    auto it = record.find("embedding");
    if (it == record.end() || !it->is_array()) {
      fail_at(path, line_no, "missing embedding array");
    }
    EmbeddingVector vec = parse_embedding(path, line_no, *it);
    if (!dimension) {
      dimension = vec.dim();
    } else if (vec.dim() != *dimension) {
      fail_at(path, line_no, "dimension mismatch in sidecar");
    }
    if (!vectors.emplace(std::move(id), std::move(vec)).second) {
      fail_at(path, line_no, "duplicate id in sidecar");
    }
  }
  return vectors;
}

}  // namespace crea
