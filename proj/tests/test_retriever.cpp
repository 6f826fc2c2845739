#include "crea/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "test_support.hpp"

using namespace crea;
using namespace crea::testing;

namespace {

EmbeddingVector vec(std::initializer_list<double> values) {
  return EmbeddingVector{values};
}

Corpus make_corpus(std::vector<std::pair<std::string, EmbeddingVector>> docs) {
  std::vector<CorpusDocument> out;
  for (auto& [id, v] : docs) {
    CorpusDocument doc;
    doc.id = id;
    doc.text = "text " + id;
    doc.language = "en";
    doc.embedding = std::move(v);
    out.push_back(std::move(doc));
  }
  return Corpus(std::nullopt, std::nullopt, std::move(out));
}

// Independent scan-sort-truncate oracle with its own cosine.
std::vector<RetrievalHit> oracle_top_k(const RetrievalIndex& index,
                                       const EmbeddingVector& query, int k) {
  std::vector<RetrievalHit> hits;
  for (const auto& [id, v] : index.entries()) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      dot += query.values[i] * v.values[i];
      na += query.values[i] * query.values[i];
      nb += v.values[i] * v.values[i];
    }
    double sim = dot / (std::sqrt(na) * std::sqrt(nb));
    if (sim > 1.0) sim = 1.0;
    if (sim < -1.0) sim = -1.0;
    hits.push_back({id, sim, 0});
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const RetrievalHit& a, const RetrievalHit& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.doc_id < b.doc_id;
                   });
  if (hits.size() > static_cast<std::size_t>(k)) hits.resize(k);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    hits[i].rank = static_cast<int>(i) + 1;
  }
  return hits;
}

EmbeddingVector random_vec(std::mt19937_64& rng, int dim) {
  EmbeddingVector v;
  v.values.reserve(dim);
  for (int i = 0; i < dim; ++i) v.values.push_back(uniform(rng, -1.0, 1.0));
  if (std::all_of(v.values.begin(), v.values.end(),
                  [](double x) { return x == 0.0; })) {
    v.values[0] = 1.0;
  }
  return v;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
  CHECK(cosine_similarity(vec({1, 0}), vec({1, 0})) == 1.0);
  CHECK(cosine_similarity(vec({3, 4, 5}), vec({3, 4, 5})) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == 0.0);
  // Independent evaluation: dot=1, |a|=sqrt(2), |b|=1 -> 1/sqrt(2).
  CHECK(std::abs(cosine_similarity(vec({1, 1}), vec({1, 0})) -
                 0.70710678118654752) < 1e-8);
  CHECK(cosine_similarity(vec({1, 0}), vec({-1, 0})) == -1.0);
}

TEST_CASE("cosine similarity error cases") {
  CHECK_THROWS_WITH_AS(cosine_similarity(vec({1, 0}), vec({1, 0, 0})),
                       doctest::Contains("dimension"), ValidationError);
  CHECK_THROWS_WITH_AS(cosine_similarity(vec({0, 0}), vec({1, 0})),
                       doctest::Contains("zero-norm"), ValidationError);
}

TEST_CASE("cosine symmetry is bit-exact") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = uniform_int(rng, 1, 32);
    const auto a = random_vec(rng, dim);
    const auto b = random_vec(rng, dim);
    CHECK(cosine_similarity(a, b) == cosine_similarity(b, a));
  }
}

TEST_CASE("build_index") {
  SUBCASE("fully embedded corpus") {
    const auto corpus = make_corpus(
        {{"d1", vec({1, 0})}, {"d2", vec({0, 1})}, {"d3", vec({1, 1})}});
    const auto index = build_index(corpus);
    CHECK(index.size() == 3);
    CHECK(index.dimension() == 2);
    CHECK(index.entries()[0].first == "d1");  // corpus order
  }

  SUBCASE("missing embedding names the document") {
    std::vector<CorpusDocument> docs(2);
    docs[0] = {"d1", "a", "en", std::nullopt, vec({1, 0})};
    docs[1] = {"d7", "b", "en", std::nullopt, std::nullopt};
    const Corpus corpus(std::nullopt, std::nullopt, std::move(docs));
    CHECK_THROWS_WITH_AS(build_index(corpus), doctest::Contains("d7"),
                         ValidationError);
  }

  SUBCASE("empty corpus gives an empty index; retrieval on it errors") {
    const auto index = build_index(Corpus{});
    CHECK(index.size() == 0);
    CHECK_THROWS_AS(retrieve_top_k(index, vec({1, 0}), 1), ValidationError);
  }
}

TEST_CASE("retrieve_top_k on the worked example") {
  const auto index = build_index(make_corpus(
      {{"d1", vec({1, 0})}, {"d2", vec({0, 1})}, {"d3", vec({0.9, 0.1})}}));
  const auto hits = retrieve_top_k(index, vec({1, 0}), 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].doc_id == "d1");
  CHECK(hits[0].score == 1.0);
  CHECK(hits[0].rank == 1);
  CHECK(hits[1].doc_id == "d3");
  // Brute force: 0.9 / sqrt(0.82)
  CHECK(std::abs(hits[1].score - 0.99388373467361886) < 1e-9);
  CHECK(hits[1].rank == 2);
}

TEST_CASE("retrieve_top_k clamps k and breaks ties by doc id") {
  const auto index = build_index(
      make_corpus({{"b", vec({1, 0})}, {"a", vec({1, 0})}, {"c", vec({0, 1})}}));

  const auto all = retrieve_top_k(index, vec({1, 0}), 10);
  REQUIRE(all.size() == 3);
  CHECK(all[0].doc_id == "a");  // bit-identical vectors: ascending id
  CHECK(all[1].doc_id == "b");
  CHECK(all[2].doc_id == "c");
  CHECK(all[2].rank == 3);

  CHECK_THROWS_AS(retrieve_top_k(index, vec({1, 0, 0}), 1), ValidationError);
  CHECK_THROWS_AS(retrieve_top_k(index, vec({1, 0}), 0), ValidationError);
}

TEST_CASE("retrieval matches the oracle on random corpora") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int dim = trial % 2 ? 4 : 16;
    const int n = uniform_int(rng, 1, 200);
    std::vector<std::pair<std::string, EmbeddingVector>> docs;
    docs.reserve(n);
    for (int i = 0; i < n; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "doc%04d", i);
      docs.emplace_back(id, random_vec(rng, dim));
    }
    // Duplicate a slice of vectors to force exact ties.
    if (n > 4 && trial % 3 == 0) {
      for (int i = 0; i < n / 4; ++i) {
        docs[n - 1 - i].second = docs[i].second;
      }
    }
    const auto index = build_index(make_corpus(docs));
    const auto query = random_vec(rng, dim);
    const int k = uniform_int(rng, 1, n + 3);

    const auto got = retrieve_top_k(index, query, k);
    const auto want = oracle_top_k(index, query, k);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].doc_id == want[i].doc_id);
      CHECK(got[i].score == want[i].score);
      CHECK(got[i].rank == want[i].rank);
    }
  }
}

TEST_CASE("ranking is invariant under positive scaling") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const int dim = uniform_int(rng, 2, 8);
    const int n = uniform_int(rng, 2, 40);
    std::vector<std::pair<std::string, EmbeddingVector>> docs;
    for (int i = 0; i < n; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "d%03d", i);
      docs.emplace_back(id, random_vec(rng, dim));
    }
    const auto query = random_vec(rng, dim);
    const auto base = retrieve_top_k(build_index(make_corpus(docs)), query, n);

    // Skip near-tied corpora; scaling can reorder within rounding noise.
    bool well_separated = true;
    for (std::size_t i = 1; i < base.size(); ++i) {
      if (std::abs(base[i - 1].score - base[i].score) < 1e-9) {
        well_separated = false;
      }
    }
    if (!well_separated) continue;

    auto scaled_docs = docs;
    for (auto& [id, v] : scaled_docs) {
      const double s = uniform(rng, 0.05, 20.0);
      for (auto& x : v.values) x *= s;
    }
    const auto scaled =
        retrieve_top_k(build_index(make_corpus(scaled_docs)), query, n);
    REQUIRE(scaled.size() == base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(scaled[i].doc_id == base[i].doc_id);  // argsort equality only
    }
  }
}

TEST_CASE("top-k is a prefix of top-(k+1)") {
  std::mt19937_64 rng(17);
  const int dim = 8;
  std::vector<std::pair<std::string, EmbeddingVector>> docs;
  for (int i = 0; i < 50; ++i) {
    docs.emplace_back("d" + std::to_string(i), random_vec(rng, dim));
  }
  const auto index = build_index(make_corpus(docs));
  const auto query = random_vec(rng, dim);
  for (int k = 1; k < 50; ++k) {
    const auto small = retrieve_top_k(index, query, k);
    const auto big = retrieve_top_k(index, query, k + 1);
    for (int i = 0; i < k; ++i) {
      CHECK(small[i].doc_id == big[i].doc_id);
      CHECK(small[i].score == big[i].score);
    }
  }
}
