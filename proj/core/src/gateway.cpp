#include "crea/gateway.hpp"

#include <algorithm>
#include <cmath>

#include "crea/text.hpp"
#include "wire.hpp"

namespace crea {

using nlohmann::json;

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "generation") return BackendKind::generation;
  if (name == "mask_scoring") return BackendKind::mask_scoring;
  if (name == "embedding") return BackendKind::embedding;
  throw ValidationError("unknown backend kind: " + std::string(name));
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::generation:
      return "generation";
    case BackendKind::mask_scoring:
      return "mask_scoring";
    case BackendKind::embedding:
      return "embedding";
  }
  return "?";
}

int default_max_new_tokens(TaskKind task) {
  switch (task) {
    case TaskKind::classification:
      return 8;
    case TaskKind::summarization:
      return 128;
    case TaskKind::qa:
      return 32;
  }
  return 8;
}

std::string generate(const BackendDescriptor& backend,
                     const GenerationRequest& request) {
  if (backend.kind != BackendKind::generation) {
    throw ValidationError("generate: backend kind is not generation");
  }
  if (request.prompt.empty()) {
    throw ValidationError("generate: empty prompt");
  }
  if (request.max_new_tokens < 1) {
    throw ValidationError("generate: max_new_tokens must be >= 1");
  }

  json body;
  body["prompt"] = request.prompt;
  body["max_new_tokens"] = request.max_new_tokens;
  body["stop"] = request.stop_sequences;
  const json response = detail::post_json(backend, "/generate", body);

  auto it = response.find("text");
  if (it == response.end() || !it->is_string()) {
    throw BackendError("generate: response has no \"text\" field");
  }
  std::string text = it->get<std::string>();

  // Truncate at the earliest stop sequence, if the backend did not.
  std::size_t cut = std::string::npos;
  for (const auto& stop : request.stop_sequences) {
    if (stop.empty()) continue;
    const std::size_t pos = text.find(stop);
    if (pos != std::string::npos) cut = std::min(cut, pos);
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

std::map<std::string, double> score_mask_candidates(
    const BackendDescriptor& backend, const MaskScoreRequest& request) {
  if (backend.kind != BackendKind::mask_scoring) {
    throw ValidationError("score_mask_candidates: backend kind is not "
                          "mask_scoring");
  }
  if (request.candidates.empty()) {
    throw ValidationError("score_mask_candidates: no candidates");
  }
  for (std::size_t i = 0; i < request.candidates.size(); ++i) {
    for (std::size_t j = i + 1; j < request.candidates.size(); ++j) {
      if (request.candidates[i] == request.candidates[j]) {
        throw ValidationError("score_mask_candidates: duplicate candidate \"" +
                              request.candidates[i] + "\"");
      }
    }
  }
  {
    std::size_t markers = 0;
    std::size_t pos = 0;
    while ((pos = request.text.find(request.mask_marker, pos)) !=
           std::string::npos) {
      ++markers;
      pos += request.mask_marker.size();
    }
    if (markers != 1) {
      throw ValidationError("score_mask_candidates: text must contain exactly "
                            "one mask marker, found " +
                            std::to_string(markers));
    }
  }

  json body;
  body["text"] = request.text;
  body["mask_marker"] = request.mask_marker;
  body["candidates"] = request.candidates;
  const json response = detail::post_json(backend, "/mask_scores", body);

  auto it = response.find("scores");
  if (it == response.end() || !it->is_object()) {
    throw BackendError("mask_scores: response has no \"scores\" object");
  }
  std::map<std::string, double> scores;
  for (const auto& candidate : request.candidates) {
    auto score_it = it->find(candidate);
    if (score_it == it->end()) {
      throw BackendError("mask_scores: response missing candidate \"" +
                         candidate + "\"");
    }
    if (!score_it->is_number()) {
      throw BackendError("mask_scores: non-numeric score for \"" + candidate +
                         "\"");
    }
    const double value = score_it->get<double>();
    if (!std::isfinite(value)) {
      throw BackendError("mask_scores: non-finite score for \"" + candidate +
                         "\"");
    }
    scores[candidate] = value;
  }
  return scores;
}

std::string classify_mask(const std::map<std::string, double>& scores,
                          const Verbalizer& verbalizer,
                          const LabelSet& labels) {
  if (verbalizer.size() != labels.size()) {
    throw ValidationError("classify_mask: verbalizer does not cover the label "
                          "set");
  }
  std::size_t best = 0;
  double best_score = 0.0;
  bool have_best = false;
  for (std::size_t id = 0; id < labels.size(); ++id) {
    auto it = scores.find(verbalizer.token_for(id));
    if (it == scores.end()) {
      throw ValidationError("classify_mask: missing score for token \"" +
                            verbalizer.token_for(id) + "\"");
    }
    if (!have_best || it->second > best_score) {  // ties keep the lowest id
      best = id;
      best_score = it->second;
      have_best = true;
    }
  }
  return labels.name_of(best);
}

SurfaceForms::SurfaceForms(const LabelSet& labels,
                           std::vector<std::vector<std::string>> forms)
    : forms_(std::move(forms)) {
  if (forms_.size() != labels.size()) {
    throw ValidationError("surface forms must cover every label");
  }
  for (std::size_t id = 0; id < forms_.size(); ++id) {
    if (forms_[id].empty()) {
      throw ValidationError("label \"" + labels.name_of(id) +
                            "\" has no surface forms");
    }
    for (const auto& form : forms_[id]) {
      if (form.empty()) {
        throw ValidationError("label \"" + labels.name_of(id) +
                              "\" has an empty surface form");
      }
    }
  }
}

SurfaceForms SurfaceForms::from_label_names(const LabelSet& labels) {
  std::vector<std::vector<std::string>> forms;
  forms.reserve(labels.size());
  for (const auto& name : labels.names()) forms.push_back({name});
  return SurfaceForms(labels, std::move(forms));
}

namespace {

bool is_ascii_punct(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return (u >= 0x21 && u <= 0x2F) || (u >= 0x3A && u <= 0x40) ||
         (u >= 0x5B && u <= 0x60) || (u >= 0x7B && u <= 0x7E);
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string trim_decoded(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && (is_ascii_space(s[begin]) || is_ascii_punct(s[begin]))) {
    ++begin;
  }
  while (end > begin &&
         (is_ascii_space(s[end - 1]) || is_ascii_punct(s[end - 1]))) {
    --end;
  }
  return s.substr(begin, end - begin);
}

}  // namespace

std::optional<std::string> classify_autoregressive(
    const std::string& output, const LabelSet& labels,
    const SurfaceForms& surface_forms) {
  if (surface_forms.size() != labels.size()) {
    throw ValidationError("classify_autoregressive: surface forms do not "
                          "cover the label set");
  }
  const std::string trimmed = text::casefold(trim_decoded(output));

  // Rule 1: exact match of the trimmed output.
  for (std::size_t id = 0; id < labels.size(); ++id) {
    for (const auto& form : surface_forms.forms_of(id)) {
      if (trimmed == text::casefold(form)) return labels.name_of(id);
    }
  }

  // Rule 2: earliest occurrence anywhere in the output.
  const std::string folded = text::casefold(output);
  std::size_t best_pos = std::string::npos;
  std::size_t best_id = 0;
  for (std::size_t id = 0; id < labels.size(); ++id) {
    for (const auto& form : surface_forms.forms_of(id)) {
      const std::size_t pos = folded.find(text::casefold(form));
      if (pos != std::string::npos && pos < best_pos) {
        best_pos = pos;
        best_id = id;
      }
    }
  }
  if (best_pos != std::string::npos) return labels.name_of(best_id);

  return std::nullopt;  // Rule 3: abstention.
}

std::string self_predict_label(const CorpusDocument& doc,
                               const PromptTemplate& tmpl,
                               const BackendDescriptor& backend,
                               const SelfPredictOptions& options) {
  if (doc.label) {
    throw ValidationError("self_predict_label: document \"" + doc.id +
                          "\" already carries a label");
  }

  EvalExample as_query;
  as_query.id = doc.id;
  as_query.text = doc.text;
  const EnrichedPrompt prompt =
      assemble_prompt(tmpl, as_query, {}, options.extra_vars);

  if (tmpl.style == TemplateStyle::mask_prediction) {
    MaskScoreRequest request;
    request.text = prompt.text;
    request.candidates = options.verbalizer.tokens();
    const auto scores = score_mask_candidates(backend, request);
    return classify_mask(scores, options.verbalizer, options.labels);
  }

  GenerationRequest request;
  request.prompt = prompt.text;
  request.max_new_tokens = options.max_new_tokens;
  request.stop_sequences = options.stop_sequences;
  const std::string output = generate(backend, request);
  const auto label =
      classify_autoregressive(output, options.labels, options.surface_forms);
  if (label) return *label;
  if (options.fallback_label) return *options.fallback_label;
  throw ValidationError("self_predict_label: abstention on document \"" +
                        doc.id + "\" and no fallback label configured");
}

}  // namespace crea
