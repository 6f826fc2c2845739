#pragma once

#include <vector>

namespace crea {

// Embedding width of paraphrase-multilingual-mpnet-base-v2, the default
// retriever encoder.
inline constexpr int kDefaultEmbeddingDim = 768;

// Dense vector in the shared cross-lingual embedding space.
struct EmbeddingVector {
  std::vector<double> values;

  int dim() const { return static_cast<int>(values.size()); }
  bool operator==(const EmbeddingVector&) const = default;
};

}  // namespace crea
