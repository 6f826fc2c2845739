#pragma once

#include <string>
#include <vector>

#include "crea/corpus.hpp"
#include "crea/embedding.hpp"

namespace crea {

struct BackendDescriptor;  // gateway.hpp

// One retrieval result; hits are ordered by descending score, ties broken by
// ascending doc_id, ranks 1..k.
struct RetrievalHit {
  std::string doc_id;
  double score = 0.0;
  int rank = 0;
};

// Flat, exact-scan index over an embedded corpus. Immutable after build.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  RetrievalIndex(int dimension,
                 std::vector<std::pair<std::string, EmbeddingVector>> entries);

  int dimension() const { return dimension_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, EmbeddingVector>>& entries() const {
    return entries_;
  }

 private:
  int dimension_ = 0;
  std::vector<std::pair<std::string, EmbeddingVector>> entries_;
};

// dot(a,b) / (|a|*|b|), accumulated left-to-right in double and clamped to
// [-1,1]. Throws on dimension mismatch or a zero-norm operand.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Requires every document to carry an embedding; insertion order is corpus
// order.
RetrievalIndex build_index(const Corpus& corpus);

// Exact top-k by cosine similarity; returns min(k, index size) hits.
std::vector<RetrievalHit> retrieve_top_k(const RetrievalIndex& index,
                                         const EmbeddingVector& query, int k);

// One vector per input text via the embedding backend, order-preserving.
// An empty input returns an empty result without a wire call.
std::vector<EmbeddingVector> embed_texts(const BackendDescriptor& backend,
                                         const std::vector<std::string>& texts);

}  // namespace crea
