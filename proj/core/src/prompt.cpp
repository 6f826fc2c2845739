#include "crea/prompt.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <unordered_set>

#include "json.hpp"

namespace crea {

using nlohmann::json;

TemplateStyle template_style_from_string(std::string_view name) {
  if (name == "autoregressive") return TemplateStyle::autoregressive;
  if (name == "mask-prediction" || name == "mask_prediction") {
    return TemplateStyle::mask_prediction;
  }
  throw ValidationError("unknown template style: " + std::string(name));
}

std::string_view to_string(TemplateStyle style) {
  return style == TemplateStyle::autoregressive ? "autoregressive"
                                                : "mask-prediction";
}

Verbalizer::Verbalizer(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& tok : tokens_) {
    if (tok.empty()) throw ValidationError("verbalizer token is empty");
    if (!seen.insert(tok).second) {
      throw ValidationError("verbalizer is not injective: duplicate token \"" +
                            tok + "\"");
    }
  }
}

std::size_t Verbalizer::label_id_for(std::string_view token) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i] == token) return i;
  }
  throw ValidationError("token not in verbalizer: " + std::string(token));
}

namespace {

std::size_t count_occurrences(std::string_view haystack,
                              std::string_view needle) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

void PromptTemplate::validate() const {
  const std::size_t marks = count_occurrences(query_body, kMaskMarker);
  if (style == TemplateStyle::mask_prediction && marks != 1) {
    throw ValidationError("template \"" + template_id +
                          "\": mask-prediction query_body must contain "
                          "exactly one [MASK], found " +
                          std::to_string(marks));
  }
  if (style == TemplateStyle::autoregressive && marks != 0) {
    throw ValidationError("template \"" + template_id +
                          "\": autoregressive query_body must not contain "
                          "[MASK]");
  }
}

DemoOrderPolicy demo_order_policy_from_string(std::string_view name) {
  if (name == "most_similar_last") return DemoOrderPolicy::most_similar_last;
  if (name == "most_similar_first") return DemoOrderPolicy::most_similar_first;
  throw ValidationError("unknown demo order policy: " + std::string(name));
}

std::string_view to_string(DemoOrderPolicy policy) {
  return policy == DemoOrderPolicy::most_similar_last ? "most_similar_last"
                                                      : "most_similar_first";
}

std::map<std::string, PromptTemplate> builtin_templates(
    const BuiltinOptions& options) {
  std::map<std::string, PromptTemplate> reg;

  {
    PromptTemplate t;
    t.template_id = "violens_ar_v1";
    t.style = TemplateStyle::autoregressive;
    t.query_body =
        "Reflecting on the statement {text}, which aggressive level does it "
        "resonate with: non-aggressive, slightly aggressive, or highly "
        "aggressive?";
    t.demo_body = t.query_body + " {label}";
    reg.emplace(t.template_id, std::move(t));
  }
  {
    PromptTemplate t;
    t.template_id = "violens_mask_v1";
    t.style = TemplateStyle::mask_prediction;
    t.query_body = "The underlying theme in {text} is [MASK].";
    t.demo_body = "The underlying theme in {text} is {label}.";
    t.verbalizer = Verbalizer({"assaultive", "indirect", "peaceful"});
    reg.emplace(t.template_id, std::move(t));
  }
  {
    PromptTemplate t;
    t.template_id = "sentnob_ar_v1";
    t.style = TemplateStyle::autoregressive;
    t.query_body =
        "Text: {text} What is a possible sentiment for the text given the "
        "following options?";
    t.demo_body = t.query_body + " {label}";
    reg.emplace(t.template_id, std::move(t));
  }
  {
    PromptTemplate t;
    t.template_id = "sentnob_mask_v1";
    t.style = TemplateStyle::mask_prediction;
    t.query_body = "{text} Sentiment: [MASK]";
    t.demo_body = "{text} Sentiment: {label}";
    t.verbalizer = Verbalizer({"positive",
                               options.neutral_corrected ? "neutral" : "neural",
                               "negative"});
    reg.emplace(t.template_id, std::move(t));
  }
  {
    PromptTemplate t;
    t.template_id = "xlsum_v1";
    t.style = TemplateStyle::autoregressive;
    t.query_body =
        "{text} Generate a concise summary of the above text using the same "
        "language as the original text:";
    t.demo_body = t.query_body + " {label}";
    reg.emplace(t.template_id, std::move(t));
  }
  {
    PromptTemplate t;
    t.template_id = "xlsum_plain_v1";
    t.style = TemplateStyle::autoregressive;
    t.query_body = "{text} Generate a concise summary of the given text";
    t.demo_body = t.query_body + " {label}";
    reg.emplace(t.template_id, std::move(t));
  }
  {
    PromptTemplate t;
    t.template_id = "xlsum_tl_v1";
    t.style = TemplateStyle::autoregressive;
    t.query_body =
        "{text} Generate a concise summary of the given text using the same "
        "language as the original text({target_lang})";
    t.demo_body = t.query_body + " {label}";
    reg.emplace(t.template_id, std::move(t));
  }
  {
    PromptTemplate t;
    t.template_id = "xquad_v1";
    t.style = TemplateStyle::autoregressive;
    t.query_body = "context: {context} question: {question} answer:";
    t.demo_body = "{text} answer: {label}";
    reg.emplace(t.template_id, std::move(t));
  }
  return reg;
}

namespace {

constexpr std::array<std::string_view, 5> kPlaceholders = {
    "text", "label", "context", "question", "target_lang"};

// Returns the placeholder name starting at body[pos] ("{name}") or empty.
std::string_view placeholder_at(std::string_view body, std::size_t pos) {
  for (const auto name : kPlaceholders) {
    if (body.size() - pos < name.size() + 2) continue;
    if (body[pos + 1 + name.size()] != '}') continue;
    if (body.compare(pos + 1, name.size(), name) == 0) return name;
  }
  return {};
}

}  // namespace

std::string render_body(std::string_view body,
                        const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(body.size());
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      const std::string_view name = placeholder_at(body, i);
      if (!name.empty()) {
        auto it = values.find(std::string(name));
        if (it == values.end()) {
          throw ValidationError("unresolved placeholder {" +
                                std::string(name) + "}");
        }
        out += it->second;
        i += name.size() + 2;
        continue;
      }
    }
    out.push_back(body[i]);
    ++i;
  }
  return out;
}

std::string render_demonstration(
    const PromptTemplate& tmpl, const CorpusDocument& doc,
    const std::string& label, const std::map<std::string, std::string>& extra) {
  if (doc.text.empty()) {
    throw ValidationError("demonstration document \"" + doc.id +
                          "\" has empty text");
  }
  std::map<std::string, std::string> values = extra;
  values["text"] = doc.text;
  values["label"] = label;
  return render_body(tmpl.demo_body, values);
}

EnrichedPrompt assemble_prompt(const PromptTemplate& tmpl,
                               const EvalExample& query,
                               const std::vector<DemoSpec>& demos,
                               const std::map<std::string, std::string>& extra) {
  std::map<std::string, std::string> query_values = extra;
  query_values["text"] = query.text;
  query_values["question"] = query.text;
  if (query.context) query_values["context"] = *query.context;

  EnrichedPrompt prompt;
  prompt.template_id = tmpl.template_id;
  std::string text;
  for (const auto& demo : demos) {
    CorpusDocument doc;
    doc.id = demo.doc_id;
    doc.text = demo.text;
    text += render_demonstration(tmpl, doc, demo.label, extra);
    text += tmpl.demo_separator;
    prompt.demonstrations.push_back({demo.doc_id, demo.label, demo.score});
  }
  text += render_body(tmpl.query_body, query_values);
  prompt.text = std::move(text);
  return prompt;
}

std::vector<RetrievalHit> order_demonstrations(std::vector<RetrievalHit> hits,
                                               DemoOrderPolicy policy) {
  if (policy == DemoOrderPolicy::most_similar_last) {
    // Input is ranked best-first with ties in ascending doc_id; a stable sort
    // by ascending score keeps tie groups in that order.
    std::stable_sort(hits.begin(), hits.end(),
                     [](const RetrievalHit& a, const RetrievalHit& b) {
                       return a.score < b.score;
                     });
  }
  return hits;
}

PromptTemplate load_template_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open template file: " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ValidationError("malformed template file: " + path.string());
  }

  const auto require = [&](const char* key) -> std::string {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_string()) {
      throw ValidationError(path.string() + ": missing or non-string \"" +
                            key + "\"");
    }
    return it->get<std::string>();
  };

  PromptTemplate tmpl;
  tmpl.template_id = require("template_id");
  tmpl.style = template_style_from_string(require("style"));
  tmpl.query_body = require("query_body");
  if (doc.contains("demo_body") && !doc["demo_body"].is_null()) {
    tmpl.demo_body = doc["demo_body"].get<std::string>();
  }
  if (doc.contains("demo_separator") && !doc["demo_separator"].is_null()) {
    tmpl.demo_separator = doc["demo_separator"].get<std::string>();
  }
  if (doc.contains("demo_position") && !doc["demo_position"].is_null()) {
    if (doc["demo_position"].get<std::string>() != "before_query") {
      throw ValidationError(path.string() +
                            ": only demo_position \"before_query\" is "
                            "supported");
    }
  }
  if (doc.contains("verbalizer") && !doc["verbalizer"].is_null()) {
    const json& v = doc["verbalizer"];
    if (!v.is_object()) {
      throw ValidationError(path.string() + ": verbalizer must be an object");
    }
    for (const auto& [label, token] : v.items()) {
      if (!token.is_string()) {
        throw ValidationError(path.string() + ": verbalizer tokens must be "
                                              "strings");
      }
      tmpl.verbalizer_by_label[label] = token.get<std::string>();
    }
    std::vector<std::string> ordered_tokens;
    if (doc.contains("label_order") && doc["label_order"].is_array()) {
      for (const auto& label : doc["label_order"]) {
        auto it = tmpl.verbalizer_by_label.find(label.get<std::string>());
        if (it == tmpl.verbalizer_by_label.end()) {
          throw ValidationError(path.string() +
                                ": label_order names a label missing from the "
                                "verbalizer");
        }
        ordered_tokens.push_back(it->second);
      }
    } else {
      for (const auto& [label, token] : tmpl.verbalizer_by_label) {
        ordered_tokens.push_back(token);  // std::map iterates sorted
      }
    }
    tmpl.verbalizer = Verbalizer(std::move(ordered_tokens));
  }
  tmpl.validate();
  return tmpl;
}

std::string template_bytes(const PromptTemplate& tmpl) {
  json doc;
  doc["template_id"] = tmpl.template_id;
  doc["style"] = std::string(to_string(tmpl.style));
  doc["query_body"] = tmpl.query_body;
  doc["demo_body"] = tmpl.demo_body;
  doc["demo_separator"] = tmpl.demo_separator;
  doc["verbalizer"] =
      tmpl.verbalizer ? json(tmpl.verbalizer->tokens()) : json(nullptr);
  return doc.dump();
}

}  // namespace crea
