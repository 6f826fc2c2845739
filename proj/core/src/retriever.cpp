#include "crea/retriever.hpp"

#include <algorithm>
#include <cmath>

#include "crea/gateway.hpp"
#include "wire.hpp"

namespace crea {

RetrievalIndex::RetrievalIndex(
    int dimension, std::vector<std::pair<std::string, EmbeddingVector>> entries)
    : dimension_(dimension), entries_(std::move(entries)) {
  for (const auto& [id, vec] : entries_) {
    if (vec.dim() != dimension_) {
      throw ValidationError("index entry \"" + id + "\" has dimension " +
                            std::to_string(vec.dim()) + ", expected " +
                            std::to_string(dimension_));
    }
  }
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("cosine: dimension mismatch (" +
                          std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()) + ")");
  }
  double dot = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    norm_a += a.values[i] * a.values[i];
    norm_b += b.values[i] * b.values[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) {
    throw ValidationError("cosine: zero-norm operand");
  }
  const double sim = dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
  return std::clamp(sim, -1.0, 1.0);
}

RetrievalIndex build_index(const Corpus& corpus) {
  std::vector<std::pair<std::string, EmbeddingVector>> entries;
  entries.reserve(corpus.size());
  int dimension = corpus.dimension().value_or(0);
  for (const auto& doc : corpus.documents()) {
    if (!doc.embedding) {
      throw ValidationError("document \"" + doc.id + "\" has no embedding");
    }
    if (dimension == 0) dimension = doc.embedding->dim();
    entries.emplace_back(doc.id, *doc.embedding);
  }
  return RetrievalIndex(dimension, std::move(entries));
}

std::vector<RetrievalHit> retrieve_top_k(const RetrievalIndex& index,
                                         const EmbeddingVector& query, int k) {
  if (k < 1) throw ValidationError("retrieve_top_k: k must be >= 1");
  if (index.size() == 0) throw ValidationError("retrieve_top_k: empty index");
  if (query.dim() != index.dimension()) {
    throw ValidationError("retrieve_top_k: query dimension " +
                          std::to_string(query.dim()) +
                          " does not match index dimension " +
                          std::to_string(index.dimension()));
  }

  std::vector<RetrievalHit> hits;
  hits.reserve(index.size());
  for (const auto& [id, vec] : index.entries()) {
    hits.push_back({id, cosine_similarity(query, vec), 0});
  }
  std::sort(hits.begin(), hits.end(),
            [](const RetrievalHit& a, const RetrievalHit& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.doc_id < b.doc_id;
            });
  const std::size_t keep = std::min<std::size_t>(k, hits.size());
  hits.resize(keep);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    hits[i].rank = static_cast<int>(i) + 1;
  }
  return hits;
}

std::vector<EmbeddingVector> embed_texts(const BackendDescriptor& backend,
                                         const std::vector<std::string>& texts) {
  if (texts.empty()) return {};

  nlohmann::json body;
  body["texts"] = texts;
  const nlohmann::json response = detail::post_json(backend, "/embed", body);

  auto vec_it = response.find("vectors");
  auto dim_it = response.find("dimension");
  if (vec_it == response.end() || !vec_it->is_array() ||
      dim_it == response.end() || !dim_it->is_number_integer()) {
    throw BackendError("embed: malformed response from " + backend.endpoint);
  }
  const int declared = dim_it->get<int>();
  if (vec_it->size() != texts.size()) {
    throw BackendError("embed: expected " + std::to_string(texts.size()) +
                       " vectors, got " + std::to_string(vec_it->size()));
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& arr : *vec_it) {
    if (!arr.is_array()) throw BackendError("embed: vector is not an array");
    EmbeddingVector vec;
    vec.values.reserve(arr.size());
    for (const auto& v : arr) {
      if (!v.is_number()) throw BackendError("embed: non-numeric component");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw BackendError("embed: non-finite component");
      vec.values.push_back(x);
    }
    if (vec.dim() != declared) {
      throw BackendError("embed: dimension drift mid-batch (" +
                         std::to_string(vec.dim()) + " vs declared " +
                         std::to_string(declared) + ")");
    }
    out.push_back(std::move(vec));
  }
  return out;
}

}  // namespace crea
