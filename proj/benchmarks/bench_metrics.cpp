#include <benchmark/benchmark.h>

#include <random>

#include "crea/metrics.hpp"

namespace {

std::vector<std::string> random_tokens(std::mt19937_64& rng, int n) {
  static const char* words[] = {"alpha", "bravo", "cat", "delta",
                                "echo",  "fox",   "gale"};
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (int i = 0; i < n; ++i) tokens.push_back(words[rng() % 7]);
  return tokens;
}

void BM_RougeL(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  std::mt19937_64 rng(9);
  const auto cand = random_tokens(rng, len);
  const auto ref = random_tokens(rng, len);
  for (auto _ : state) {
    benchmark::DoNotOptimize(crea::rouge_l(cand, ref));
  }
}
BENCHMARK(BM_RougeL)->Arg(32)->Arg(128)->Arg(512);

void BM_RougeLSum(benchmark::State& state) {
  const int sentences = static_cast<int>(state.range(0));
  std::mt19937_64 rng(11);
  std::string cand, ref;
  for (int s = 0; s < sentences; ++s) {
    for (const auto& tok : random_tokens(rng, 12)) cand += tok + " ";
    cand += ". ";
    for (const auto& tok : random_tokens(rng, 12)) ref += tok + " ";
    ref += ". ";
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(crea::rouge_lsum(cand, ref));
  }
}
BENCHMARK(BM_RougeLSum)->Arg(4)->Arg(16);

void BM_QaScores(benchmark::State& state) {
  std::mt19937_64 rng(13);
  std::string pred, gold;
  for (const auto& tok : random_tokens(rng, 10)) pred += tok + " ";
  for (const auto& tok : random_tokens(rng, 10)) gold += tok + " ";
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        crea::qa_scores(pred, {gold}, crea::NormalizationProfile::english_squad));
  }
}
BENCHMARK(BM_QaScores);

void BM_ClassificationReport(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(15);
  const crea::LabelSet labels({"a", "b", "c"});
  std::vector<std::optional<std::string>> preds;
  std::vector<std::string> golds;
  for (int i = 0; i < n; ++i) {
    preds.emplace_back(labels.name_of(rng() % 3));
    golds.push_back(labels.name_of(rng() % 3));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        crea::classification_report(crea::confusion(preds, golds, labels)));
  }
}
BENCHMARK(BM_ClassificationReport)->Arg(1000)->Arg(10000);

}  // namespace
