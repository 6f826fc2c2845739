#include <benchmark/benchmark.h>

#include <random>

#include "crea/retriever.hpp"

namespace {

using crea::EmbeddingVector;
using crea::RetrievalIndex;

double next_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

EmbeddingVector random_vec(std::mt19937_64& rng, int dim) {
  EmbeddingVector v;
  v.values.reserve(dim);
  for (int i = 0; i < dim; ++i) v.values.push_back(2.0 * next_double(rng) - 1.0);
  return v;
}

RetrievalIndex make_index(int n, int dim) {
  std::mt19937_64 rng(17);
  std::vector<std::pair<std::string, EmbeddingVector>> docs;
  docs.reserve(n);
  for (int i = 0; i < n; ++i) {
    docs.emplace_back("doc" + std::to_string(i), random_vec(rng, dim));
  }
  return RetrievalIndex(dim, std::move(docs));
}

void BM_CosineSimilarity(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  const auto a = random_vec(rng, dim);
  const auto b = random_vec(rng, dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(crea::cosine_similarity(a, b));
  }
}
BENCHMARK(BM_CosineSimilarity)->Arg(64)->Arg(768);

void BM_RetrieveTopK(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const auto index = make_index(n, dim);
  std::mt19937_64 rng(5);
  const auto query = random_vec(rng, dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(crea::retrieve_top_k(index, query, 3));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_RetrieveTopK)
    ->Args({1000, 64})
    ->Args({10000, 64})
    ->Args({1000, 768})
    ->Args({10000, 768});

}  // namespace
