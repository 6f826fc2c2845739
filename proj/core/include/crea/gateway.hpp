#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crea/corpus.hpp"
#include "crea/prompt.hpp"

namespace crea {

enum class BackendKind { generation, mask_scoring, embedding };

BackendKind backend_kind_from_string(std::string_view name);
std::string_view to_string(BackendKind kind);

struct BackendDescriptor {
  std::string endpoint;  // e.g. "http://127.0.0.1:8750"
  BackendKind kind = BackendKind::generation;
  std::chrono::milliseconds timeout{30000};
  int retry_budget = 2;  // retries after the first attempt
  std::chrono::milliseconds backoff{50};
};

struct GenerationRequest {
  std::string prompt;
  int max_new_tokens = 8;
  std::vector<std::string> stop_sequences;
};

struct MaskScoreRequest {
  std::string text;  // contains exactly one mask marker
  std::vector<std::string> candidates;
  std::string mask_marker = std::string(kMaskMarker);
};

// Task-shaped generation budgets.
int default_max_new_tokens(TaskKind task);

// POST /generate; the continuation is truncated at the first stop sequence.
// The prompt is sent byte-for-byte as given.
std::string generate(const BackendDescriptor& backend,
                     const GenerationRequest& request);

// POST /mask_scores; every candidate must come back with a finite score.
std::map<std::string, double> score_mask_candidates(
    const BackendDescriptor& backend, const MaskScoreRequest& request);

// Label whose verbalizer token scores highest; ties go to the lowest label id.
std::string classify_mask(const std::map<std::string, double>& scores,
                          const Verbalizer& verbalizer, const LabelSet& labels);

// Accepted spellings of each label in generated text, indexed by label id.
class SurfaceForms {
 public:
  SurfaceForms() = default;
  SurfaceForms(const LabelSet& labels,
               std::vector<std::vector<std::string>> forms);
  // Every label's name as its only surface form.
  static SurfaceForms from_label_names(const LabelSet& labels);

  const std::vector<std::string>& forms_of(std::size_t label_id) const {
    return forms_.at(label_id);
  }
  std::size_t size() const { return forms_.size(); }

 private:
  std::vector<std::vector<std::string>> forms_;
};

// Decodes generated text to a label: (1) trimmed case-insensitive exact match,
// (2) earliest case-insensitive occurrence (ties: position, then label id),
// (3) nullopt = abstention.
std::optional<std::string> classify_autoregressive(
    const std::string& output, const LabelSet& labels,
    const SurfaceForms& surface_forms);

struct SelfPredictOptions {
  LabelSet labels;
  Verbalizer verbalizer;       // mask-scoring backends
  SurfaceForms surface_forms;  // generation backends
  std::optional<std::string> fallback_label;  // required once an abstention occurs
  int max_new_tokens = 8;
  std::vector<std::string> stop_sequences;
  std::map<std::string, std::string> extra_vars;
};

// Labels an unlabeled document by running the query template zero-shot over
// the document text.
std::string self_predict_label(const CorpusDocument& doc,
                               const PromptTemplate& tmpl,
                               const BackendDescriptor& backend,
                               const SelfPredictOptions& options);

}  // namespace crea
