#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crea/corpus.hpp"
#include "crea/gateway.hpp"
#include "crea/metrics.hpp"
#include "crea/prompt.hpp"

namespace crea {

struct SelfPredictionConfig {
  bool enabled = false;
  std::optional<std::string> fallback_label;
};

// One experiment: task, template, k, data paths, backends, decode maps.
// Mirrors the JSON config file one-to-one.
struct ExperimentConfig {
  TaskKind task = TaskKind::classification;
  std::string template_id;               // exactly one of template_id /
  std::filesystem::path template_file;   // template_file must be set
  int k = 0;
  DemoOrderPolicy demo_order_policy = DemoOrderPolicy::most_similar_last;
  std::filesystem::path retrieval_corpus;
  std::filesystem::path eval_set;
  std::filesystem::path query_embeddings;  // optional precomputed sidecar
  std::vector<std::string> labels;         // classification class names
  std::map<std::string, std::string> label_map;  // class name -> mask token
  std::map<std::string, std::vector<std::string>> surface_forms;
  std::optional<BackendDescriptor> embedding_backend;
  std::optional<BackendDescriptor> inference_backend;
  SelfPredictionConfig self_prediction;
  int parallelism = 1;
  long long seed = 0;  // reserved; no sampled behavior yet
  std::filesystem::path output_dir = "out";
  std::optional<int> max_new_tokens;  // default depends on task
  std::vector<std::string> stop_sequences = {"\n"};
  double error_quota = 0.10;
  std::string target_lang;
  std::string verbalizer_variant = "literal";  // or neutral_corrected
  NormalizationProfile qa_profile = NormalizationProfile::generic;
  bool display_x100 = false;  // ROUGE display scale
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// CREA_EMBEDDING_ENDPOINT, CREA_INFERENCE_ENDPOINT, CREA_PARALLELISM.
void apply_env_overrides(ExperimentConfig& config);

// Throws ValidationError on inconsistent configuration. Never touches the
// retrieval corpus when k == 0.
void validate_config(const ExperimentConfig& config);

struct RunArtifacts {
  std::filesystem::path report_json;
  std::filesystem::path report_csv;
  std::filesystem::path manifest_json;
};

struct ClassificationRunResult {
  ClassificationReport report;
  RunArtifacts artifacts;
};

struct SummarizationRunResult {
  RougeScores model;
  RougeScores lead64;
  RunArtifacts artifacts;
};

struct QaRunResult {
  QaScores scores;
  RunArtifacts artifacts;
};

ClassificationRunResult run_classification(const ExperimentConfig& config);
SummarizationRunResult run_summarization(const ExperimentConfig& config);
QaRunResult run_qa(const ExperimentConfig& config);

// Dispatches on config.task.
RunArtifacts run_experiment(const ExperimentConfig& config);

struct SweepRow {
  std::string template_id;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by template_id
  std::filesystem::path csv_path;
  std::filesystem::path json_path;
};

// Runs each config (they may differ only in template), one row per template.
SweepResult template_sweep(const std::vector<ExperimentConfig>& configs,
                           const std::filesystem::path& output_dir);

struct MetricDelta {
  std::size_t run_index = 0;  // 1-based; 0 is the baseline
  std::string metric;
  double baseline = 0.0;
  double value = 0.0;
  double delta = 0.0;
};

struct PredictionDiff {
  std::string id;
  std::vector<std::optional<std::string>> predictions;  // one per manifest
};

struct CompareResult {
  std::vector<std::string> manifests;
  std::vector<MetricDelta> metric_deltas;
  std::vector<PredictionDiff> prediction_diffs;
};

// All manifests must share the eval-set fingerprint; the first one is the
// baseline.
CompareResult compare_runs(
    const std::vector<std::filesystem::path>& manifest_paths);

std::string compare_result_to_json(const CompareResult& result);

}  // namespace crea
