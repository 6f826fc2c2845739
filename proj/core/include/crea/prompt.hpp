#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crea/corpus.hpp"
#include "crea/retriever.hpp"

namespace crea {

inline constexpr std::string_view kMaskMarker = "[MASK]";

enum class TemplateStyle { autoregressive, mask_prediction };

TemplateStyle template_style_from_string(std::string_view name);
std::string_view to_string(TemplateStyle style);

// Injective map label id -> token string, in label-id order.
class Verbalizer {
 public:
  Verbalizer() = default;
  explicit Verbalizer(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token_for(std::size_t label_id) const {
    return tokens_.at(label_id);
  }
  // Throws for tokens outside the map.
  std::size_t label_id_for(std::string_view token) const;

  bool operator==(const Verbalizer&) const = default;

 private:
  std::vector<std::string> tokens_;
};

// Rendering rules for one task/model-style pair. query_body may reference
// {text}, {context}, {question}, {target_lang} and, for mask templates, must
// contain exactly one [MASK]; demo_body may reference {text} and {label}.
struct PromptTemplate {
  std::string template_id;
  TemplateStyle style = TemplateStyle::autoregressive;
  std::string query_body;
  std::string demo_body;
  std::string demo_separator = "\n";
  std::optional<Verbalizer> verbalizer;  // mask-prediction templates
  // Label-name -> token map, kept when a template file spells the verbalizer
  // that way; the runner binds it against the run's label set.
  std::map<std::string, std::string> verbalizer_by_label;

  // Throws ValidationError if the mask-marker or placeholder rules are broken.
  void validate() const;
};

// A demonstration ready for rendering: the retrieved document's text plus the
// label string to show (label name, verbalizer token, reference summary, or
// answer, depending on task and style).
struct DemoSpec {
  std::string doc_id;
  std::string text;
  std::string label;
  double score = 0.0;
};

// The assembled model input with its provenance.
struct EnrichedPrompt {
  std::string text;
  struct Demo {
    std::string doc_id;
    std::string label;
    double score;
  };
  std::vector<Demo> demonstrations;
  std::string template_id;
};

enum class DemoOrderPolicy { most_similar_last, most_similar_first };

DemoOrderPolicy demo_order_policy_from_string(std::string_view name);
std::string_view to_string(DemoOrderPolicy policy);

struct BuiltinOptions {
  // Registers the SentNoB mask verbalizer with "neutral" instead of the
  // literal "neural".
  bool neutral_corrected = false;
};

// The built-in templates, keyed by template_id:
//   violens_ar_v1, violens_mask_v1, sentnob_ar_v1, sentnob_mask_v1,
//   xlsum_v1, xlsum_plain_v1, xlsum_tl_v1, xquad_v1
std::map<std::string, PromptTemplate> builtin_templates(
    const BuiltinOptions& options = {});

// Single-pass placeholder substitution: placeholders are replaced once and
// substituted text is never rescanned. A referenced placeholder without a
// value is an error.
std::string render_body(std::string_view body,
                        const std::map<std::string, std::string>& values);

std::string render_demonstration(
    const PromptTemplate& tmpl, const CorpusDocument& doc,
    const std::string& label,
    const std::map<std::string, std::string>& extra = {});

// q-hat: rendered demos joined by demo_separator, then the rendered query
// body. With no demos the result is exactly the rendered query body.
EnrichedPrompt assemble_prompt(
    const PromptTemplate& tmpl, const EvalExample& query,
    const std::vector<DemoSpec>& demos,
    const std::map<std::string, std::string>& extra = {});

// Stable reorder of ranked hits; most_similar_last puts the best hit adjacent
// to the query.
std::vector<RetrievalHit> order_demonstrations(std::vector<RetrievalHit> hits,
                                               DemoOrderPolicy policy);

// Custom template file: {"template_id","style","query_body","demo_body",
// "demo_separator","verbalizer": {label: token}}. The verbalizer map is
// ordered by the label_order list when present, else by sorted label name.
PromptTemplate load_template_file(const std::filesystem::path& path);

// Serialized form used for template fingerprinting.
std::string template_bytes(const PromptTemplate& tmpl);

}  // namespace crea
