#include <benchmark/benchmark.h>

#include "crea/prompt.hpp"

namespace {

void BM_AssemblePrompt(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const auto registry = crea::builtin_templates();
  const auto& tmpl = registry.at("sentnob_ar_v1");

  crea::EvalExample query;
  query.id = "q";
  query.text = "একটি নমুনা বাক্য যা শ্রেণীবদ্ধ করা হবে";
  query.gold = {"Positive"};

  std::vector<crea::DemoSpec> demos;
  for (int i = 0; i < k; ++i) {
    demos.push_back({"d" + std::to_string(i),
                     "an English demonstration sentence number " +
                         std::to_string(i),
                     "Positive", 0.9 - 0.1 * i});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(crea::assemble_prompt(tmpl, query, demos));
  }
}
BENCHMARK(BM_AssemblePrompt)->Arg(0)->Arg(1)->Arg(3);

}  // namespace
