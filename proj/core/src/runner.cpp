#include "crea/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "crea/hash.hpp"
#include "crea/retriever.hpp"
#include "json.hpp"

namespace crea {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

json number_or_null(const std::optional<int>& v) {
  return v ? json(*v) : json(nullptr);
}

BackendDescriptor parse_backend(const json& node, BackendKind default_kind) {
  BackendDescriptor backend;
  backend.kind = default_kind;
  if (!node.contains("endpoint") || !node["endpoint"].is_string()) {
    throw ValidationError("backend needs an \"endpoint\" string");
  }
  backend.endpoint = node["endpoint"].get<std::string>();
  if (node.contains("kind") && !node["kind"].is_null()) {
    backend.kind = backend_kind_from_string(node["kind"].get<std::string>());
  }
  if (node.contains("timeout_ms")) {
    backend.timeout = std::chrono::milliseconds(node["timeout_ms"].get<int>());
  }
  if (node.contains("retry_budget")) {
    backend.retry_budget = node["retry_budget"].get<int>();
    if (backend.retry_budget < 0) {
      throw ValidationError("retry_budget must be non-negative");
    }
  }
  if (node.contains("backoff_ms")) {
    backend.backoff = std::chrono::milliseconds(node["backoff_ms"].get<int>());
  }
  return backend;
}

json backend_snapshot(const std::optional<BackendDescriptor>& backend) {
  if (!backend) return json(nullptr);
  json node;
  node["endpoint"] = backend->endpoint;
  node["kind"] = std::string(to_string(backend->kind));
  node["timeout_ms"] = static_cast<long long>(backend->timeout.count());
  node["retry_budget"] = backend->retry_budget;
  node["backoff_ms"] = static_cast<long long>(backend->backoff.count());
  return node;
}

ordered_json config_snapshot(const ExperimentConfig& config) {
  ordered_json snap;
  snap["task"] = std::string(to_string(config.task));
  snap["template_id"] = config.template_id;
  snap["template_file"] = config.template_file.string();
  snap["k"] = config.k;
  snap["demo_order_policy"] = std::string(to_string(config.demo_order_policy));
  snap["retrieval_corpus"] = config.retrieval_corpus.string();
  snap["eval_set"] = config.eval_set.string();
  snap["query_embeddings"] = config.query_embeddings.string();
  snap["labels"] = config.labels;
  snap["label_map"] = config.label_map;
  snap["surface_forms"] = config.surface_forms;
  snap["backends"] = {{"embedding", backend_snapshot(config.embedding_backend)},
                      {"inference", backend_snapshot(config.inference_backend)}};
  snap["self_prediction"] = {
      {"enabled", config.self_prediction.enabled},
      {"fallback_label", config.self_prediction.fallback_label
                             ? json(*config.self_prediction.fallback_label)
                             : json(nullptr)}};
  snap["parallelism"] = config.parallelism;
  snap["seed"] = config.seed;
  snap["output_dir"] = config.output_dir.string();
  snap["max_new_tokens"] = number_or_null(config.max_new_tokens);
  snap["stop_sequences"] = config.stop_sequences;
  snap["error_quota"] = config.error_quota;
  snap["target_lang"] = config.target_lang;
  snap["verbalizer_variant"] = config.verbalizer_variant;
  snap["qa_profile"] = std::string(to_string(config.qa_profile));
  snap["display_scale"] = config.display_x100 ? "x100" : "unit";
  return snap;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ValidationError("malformed config JSON: " + path.string());
  }

  ExperimentConfig config;
  if (!doc.contains("task") || !doc["task"].is_string()) {
    throw ValidationError(path.string() + ": config needs a \"task\"");
  }
  config.task = task_kind_from_string(doc["task"].get<std::string>());
  config.template_id = doc.value("template_id", std::string{});
  config.template_file = doc.value("template_file", std::string{});
  config.k = doc.value("k", 0);
  if (doc.contains("demo_order_policy")) {
    config.demo_order_policy = demo_order_policy_from_string(
        doc["demo_order_policy"].get<std::string>());
  }
  config.retrieval_corpus = doc.value("retrieval_corpus", std::string{});
  config.eval_set = doc.value("eval_set", std::string{});
  config.query_embeddings = doc.value("query_embeddings", std::string{});
  if (doc.contains("labels")) {
    config.labels = doc["labels"].get<std::vector<std::string>>();
  }
  if (doc.contains("label_map")) {
    config.label_map =
        doc["label_map"].get<std::map<std::string, std::string>>();
  }
  if (doc.contains("surface_forms")) {
    config.surface_forms =
        doc["surface_forms"]
            .get<std::map<std::string, std::vector<std::string>>>();
  }
  if (doc.contains("backends") && doc["backends"].is_object()) {
    const json& backends = doc["backends"];
    if (backends.contains("embedding") && !backends["embedding"].is_null()) {
      config.embedding_backend =
          parse_backend(backends["embedding"], BackendKind::embedding);
    }
    if (backends.contains("inference") && !backends["inference"].is_null()) {
      config.inference_backend =
          parse_backend(backends["inference"], BackendKind::generation);
    }
  }
  if (doc.contains("self_prediction") && doc["self_prediction"].is_object()) {
    const json& sp = doc["self_prediction"];
    config.self_prediction.enabled = sp.value("enabled", false);
    if (sp.contains("fallback_label") && !sp["fallback_label"].is_null()) {
      config.self_prediction.fallback_label =
          sp["fallback_label"].get<std::string>();
    }
  }
  config.parallelism = doc.value("parallelism", 1);
  config.seed = doc.value("seed", 0LL);
  config.output_dir = doc.value("output_dir", std::string{"out"});
  if (doc.contains("max_new_tokens") && !doc["max_new_tokens"].is_null()) {
    config.max_new_tokens = doc["max_new_tokens"].get<int>();
  }
  if (doc.contains("stop_sequences")) {
    config.stop_sequences =
        doc["stop_sequences"].get<std::vector<std::string>>();
  }
  config.error_quota = doc.value("error_quota", 0.10);
  config.target_lang = doc.value("target_lang", std::string{});
  config.verbalizer_variant =
      doc.value("verbalizer_variant", std::string{"literal"});
  if (doc.contains("qa_profile")) {
    config.qa_profile =
        normalization_profile_from_string(doc["qa_profile"].get<std::string>());
  }
  if (doc.contains("display_scale")) {
    const std::string scale = doc["display_scale"].get<std::string>();
    if (scale != "unit" && scale != "x100") {
      throw ValidationError("display_scale must be \"unit\" or \"x100\"");
    }
    config.display_x100 = scale == "x100";
  }
  return config;
}

void apply_env_overrides(ExperimentConfig& config) {
  if (const char* endpoint = std::getenv("CREA_EMBEDDING_ENDPOINT")) {
    if (!config.embedding_backend) {
      BackendDescriptor backend;
      backend.kind = BackendKind::embedding;
      config.embedding_backend = backend;
    }
    config.embedding_backend->endpoint = endpoint;
  }
  if (const char* endpoint = std::getenv("CREA_INFERENCE_ENDPOINT")) {
    if (!config.inference_backend) {
      BackendDescriptor backend;
      backend.kind = BackendKind::generation;
      config.inference_backend = backend;
    }
    config.inference_backend->endpoint = endpoint;
  }
  if (const char* parallelism = std::getenv("CREA_PARALLELISM")) {
    config.parallelism = std::atoi(parallelism);
  }
}

void validate_config(const ExperimentConfig& config) {
  const bool has_id = !config.template_id.empty();
  const bool has_file = !config.template_file.empty();
  if (has_id == has_file) {
    throw ValidationError(
        "config must set exactly one of template_id / template_file");
  }
  if (config.k < 0) throw ValidationError("k must be non-negative");
  if (config.parallelism < 1) {
    throw ValidationError("parallelism must be >= 1");
  }
  if (config.error_quota < 0.0 || config.error_quota > 1.0) {
    throw ValidationError("error_quota must be in [0,1]");
  }
  if (config.eval_set.empty()) {
    throw ValidationError("config needs an eval_set path");
  }
  if (config.k > 0 && config.retrieval_corpus.empty()) {
    throw ValidationError("k > 0 requires a retrieval_corpus path");
  }
  if (config.self_prediction.enabled &&
      config.task != TaskKind::classification) {
    throw ValidationError("self_prediction is only defined for classification");
  }
  if (config.verbalizer_variant != "literal" &&
      config.verbalizer_variant != "neutral_corrected") {
    throw ValidationError("verbalizer_variant must be literal or "
                          "neutral_corrected");
  }
  if (!config.inference_backend) {
    throw ValidationError("config needs an inference backend");
  }
  if (config.max_new_tokens && *config.max_new_tokens < 1) {
    throw ValidationError("max_new_tokens must be >= 1");
  }
}

namespace {

// Everything resolved once per run and shared read-only by the workers.
struct Pipeline {
  ExperimentConfig config;
  PromptTemplate tmpl;
  std::optional<LabelSet> labels;
  Verbalizer verbalizer;
  SurfaceForms surface_forms;
  std::vector<EvalExample> examples;
  std::optional<Corpus> corpus;
  std::optional<RetrievalIndex> index;
  std::map<std::string, EmbeddingVector> sidecar;
  bool have_sidecar = false;
  std::string eval_fingerprint;
  std::string corpus_fingerprint;  // empty when the corpus is never opened
  std::string template_hash;
  int max_new_tokens = 8;

  std::atomic<long long> embed_calls{0};
  std::atomic<long long> generate_calls{0};
  std::atomic<long long> mask_calls{0};

  std::mutex self_predict_mutex;
  std::map<std::string, std::string> self_predict_cache;

  std::map<std::string, std::string> extra_vars() const {
    std::map<std::string, std::string> vars;
    if (!config.target_lang.empty()) vars["target_lang"] = config.target_lang;
    return vars;
  }
};

struct ExampleRow {
  std::string status;  // ok | abstained | error
  std::optional<std::string> prediction;
  std::string raw_output;
  std::string query_string;
  bool used_retrieval = false;
  std::uint64_t prompt_hash = 0;
  struct Demo {
    std::string doc_id;
    double score = 0.0;
    std::string label;           // provenance: class name or gold text
    std::string rendered_label;  // string substituted into the prompt
  };
  std::vector<Demo> demos;
  std::string error;
};

PromptTemplate resolve_template(const ExperimentConfig& config) {
  if (!config.template_file.empty()) {
    return load_template_file(config.template_file);
  }
  BuiltinOptions options;
  options.neutral_corrected = config.verbalizer_variant == "neutral_corrected";
  auto registry = builtin_templates(options);
  auto it = registry.find(config.template_id);
  if (it == registry.end()) {
    throw ValidationError("unknown template_id: " + config.template_id);
  }
  return it->second;
}

void prepare(const ExperimentConfig& config, Pipeline& pipe) {
  validate_config(config);

  pipe.config = config;
  pipe.tmpl = resolve_template(config);
  pipe.tmpl.validate();
  pipe.template_hash = fingerprint_bytes(template_bytes(pipe.tmpl));
  pipe.max_new_tokens =
      config.max_new_tokens.value_or(default_max_new_tokens(config.task));

  if (config.task != TaskKind::classification &&
      pipe.tmpl.style == TemplateStyle::mask_prediction) {
    throw ValidationError("mask-prediction templates only support "
                          "classification");
  }
  const BackendKind required_kind =
      pipe.tmpl.style == TemplateStyle::mask_prediction
          ? BackendKind::mask_scoring
          : BackendKind::generation;
  if (config.inference_backend->kind != required_kind) {
    throw ValidationError(
        std::string("inference backend kind must be ") +
        std::string(to_string(required_kind)) + " for this template");
  }
  if (pipe.tmpl.query_body.find("{target_lang}") != std::string::npos &&
      config.target_lang.empty()) {
    throw ValidationError("template references {target_lang}; set target_lang "
                          "in the config");
  }

  // The retrieval corpus is only ever opened for k > 0 runs.
  if (config.k > 0) {
    pipe.corpus_fingerprint = fingerprint_file(config.retrieval_corpus);
    pipe.corpus = load_corpus(config.retrieval_corpus);
  }

  if (config.task == TaskKind::classification) {
    if (!config.labels.empty()) {
      pipe.labels = LabelSet(config.labels);
    } else if (pipe.corpus && pipe.corpus->label_set()) {
      pipe.labels = *pipe.corpus->label_set();
    } else {
      throw ValidationError("classification needs \"labels\" in the config "
                            "(or a corpus with a declared label_set)");
    }
  }

  pipe.eval_fingerprint = fingerprint_file(config.eval_set);
  pipe.examples = load_eval_set(config.eval_set, config.task, pipe.labels);
  if (pipe.examples.empty()) {
    throw ValidationError("eval set is empty: " + config.eval_set.string());
  }

  if (pipe.labels) {
    // Verbalizer tokens: config label_map, else the template's own map, else
    // the label names themselves.
    std::vector<std::string> tokens;
    for (const auto& name : pipe.labels->names()) {
      if (!config.label_map.empty()) {
        auto it = config.label_map.find(name);
        if (it == config.label_map.end()) {
          throw ValidationError("label_map is missing class \"" + name + "\"");
        }
        tokens.push_back(it->second);
      } else if (!pipe.tmpl.verbalizer_by_label.empty()) {
        auto it = pipe.tmpl.verbalizer_by_label.find(name);
        if (it == pipe.tmpl.verbalizer_by_label.end()) {
          throw ValidationError("template verbalizer is missing class \"" +
                                name + "\"");
        }
        tokens.push_back(it->second);
      } else {
        tokens.push_back(name);
      }
    }
    pipe.verbalizer = Verbalizer(std::move(tokens));

    if (!config.surface_forms.empty()) {
      std::vector<std::vector<std::string>> forms;
      for (const auto& name : pipe.labels->names()) {
        auto it = config.surface_forms.find(name);
        if (it == config.surface_forms.end()) {
          throw ValidationError("surface_forms is missing class \"" + name +
                                "\"");
        }
        forms.push_back(it->second);
      }
      pipe.surface_forms = SurfaceForms(*pipe.labels, std::move(forms));
    } else {
      pipe.surface_forms = SurfaceForms::from_label_names(*pipe.labels);
    }
  }

  if (config.k > 0) {
    // Complete missing corpus embeddings through the backend, in corpus order.
    std::vector<std::string> missing_ids;
    std::vector<std::string> missing_texts;
    for (const auto& doc : pipe.corpus->documents()) {
      if (!doc.embedding) {
        missing_ids.push_back(doc.id);
        missing_texts.push_back(doc.text);
      }
    }
    if (!missing_ids.empty()) {
      if (!config.embedding_backend) {
        throw ValidationError("document \"" + missing_ids.front() +
                              "\" has no embedding and no embedding backend "
                              "is configured");
      }
      std::map<std::string, EmbeddingVector> fetched;
      const std::size_t batch = 64;
      for (std::size_t start = 0; start < missing_texts.size(); start += batch) {
        const std::size_t end = std::min(start + batch, missing_texts.size());
        std::vector<std::string> chunk(missing_texts.begin() + start,
                                       missing_texts.begin() + end);
        pipe.embed_calls.fetch_add(1);
        auto vectors = embed_texts(*config.embedding_backend, chunk);
        for (std::size_t i = 0; i < vectors.size(); ++i) {
          fetched.emplace(missing_ids[start + i], std::move(vectors[i]));
        }
      }
      pipe.corpus = attach_embeddings(std::move(*pipe.corpus), fetched);
    }
    pipe.index = build_index(*pipe.corpus);

    if (!config.query_embeddings.empty()) {
      pipe.sidecar = load_embedding_sidecar(config.query_embeddings);
      pipe.have_sidecar = true;
    }
  }

}

std::string self_predicted_label(Pipeline& pipe, const CorpusDocument& doc) {
  // Serialized so each document is predicted exactly once even under
  // parallel workers, keeping manifest request counts reproducible.
  std::lock_guard<std::mutex> lock(pipe.self_predict_mutex);
  auto it = pipe.self_predict_cache.find(doc.id);
  if (it != pipe.self_predict_cache.end()) return it->second;

  SelfPredictOptions options;
  options.labels = *pipe.labels;
  options.verbalizer = pipe.verbalizer;
  options.surface_forms = pipe.surface_forms;
  options.fallback_label = pipe.config.self_prediction.fallback_label;
  options.max_new_tokens = pipe.max_new_tokens;
  options.stop_sequences = pipe.config.stop_sequences;
  options.extra_vars = pipe.extra_vars();

  if (pipe.tmpl.style == TemplateStyle::mask_prediction) {
    pipe.mask_calls.fetch_add(1);
  } else {
    pipe.generate_calls.fetch_add(1);
  }
  std::string label = self_predict_label(doc, pipe.tmpl,
                                         *pipe.config.inference_backend,
                                         options);
  return pipe.self_predict_cache.emplace(doc.id, std::move(label))
      .first->second;
}

ExampleRow process_example(Pipeline& pipe, const EvalExample& example) {
  ExampleRow row;
  const ExperimentConfig& config = pipe.config;

  std::vector<DemoSpec> demo_specs;
  if (config.k > 0) {
    row.used_retrieval = true;
    row.query_string = example.text;  // for QA this is the question

    EmbeddingVector query_vec;
    bool have_vec = false;
    if (pipe.have_sidecar) {
      auto it = pipe.sidecar.find(example.id);
      if (it != pipe.sidecar.end()) {
        query_vec = it->second;
        have_vec = true;
      }
    }
    if (!have_vec) {
      if (!config.embedding_backend) {
        throw ValidationError("no precomputed embedding for \"" + example.id +
                              "\" and no embedding backend configured");
      }
      pipe.embed_calls.fetch_add(1);
      query_vec =
          embed_texts(*config.embedding_backend, {row.query_string}).front();
    }

    auto hits = retrieve_top_k(*pipe.index, query_vec, config.k);
    hits = order_demonstrations(std::move(hits), config.demo_order_policy);

    for (const auto& hit : hits) {
      const CorpusDocument* doc = pipe.corpus->find(hit.doc_id);
      if (doc == nullptr) throw Error("index doc missing from corpus");

      std::string label_name;
      if (doc->label) {
        label_name = *doc->label;
      } else if (config.self_prediction.enabled) {
        label_name = self_predicted_label(pipe, *doc);
      } else {
        throw ValidationError("retrieved document \"" + doc->id +
                              "\" is unlabeled and self-prediction is off");
      }

      std::string rendered = label_name;
      if (config.task == TaskKind::classification) {
        const std::size_t id = pipe.labels->id_of(label_name);
        rendered = pipe.tmpl.style == TemplateStyle::mask_prediction
                       ? pipe.verbalizer.token_for(id)
                       : pipe.surface_forms.forms_of(id).front();
      }
      demo_specs.push_back({doc->id, doc->text, rendered, hit.score});
      row.demos.push_back({doc->id, hit.score, label_name, rendered});
    }
  }

  const EnrichedPrompt prompt =
      assemble_prompt(pipe.tmpl, example, demo_specs, pipe.extra_vars());
  row.prompt_hash = fnv1a64(prompt.text);

  if (config.task == TaskKind::classification &&
      pipe.tmpl.style == TemplateStyle::mask_prediction) {
    MaskScoreRequest request;
    request.text = prompt.text;
    request.candidates = pipe.verbalizer.tokens();
    pipe.mask_calls.fetch_add(1);
    const auto scores =
        score_mask_candidates(*config.inference_backend, request);
    row.prediction = classify_mask(scores, pipe.verbalizer, *pipe.labels);
    row.raw_output = json(scores).dump();
    row.status = "ok";
    return row;
  }

  GenerationRequest request;
  request.prompt = prompt.text;
  request.max_new_tokens = pipe.max_new_tokens;
  request.stop_sequences = config.stop_sequences;
  pipe.generate_calls.fetch_add(1);
  const std::string output = generate(*config.inference_backend, request);
  row.raw_output = output;

  if (config.task == TaskKind::classification) {
    const auto label =
        classify_autoregressive(output, *pipe.labels, pipe.surface_forms);
    if (label) {
      row.prediction = *label;
      row.status = "ok";
    } else {
      row.status = "abstained";
    }
  } else {
    row.prediction = output;
    row.status = "ok";
  }
  return row;
}

std::vector<ExampleRow> run_examples(Pipeline& pipe) {
  const std::size_t n = pipe.examples.size();
  std::vector<ExampleRow> rows(n);
  const long long allowed_errors =
      static_cast<long long>(pipe.config.error_quota * static_cast<double>(n));

  std::atomic<std::size_t> next{0};
  std::atomic<long long> errors{0};
  std::atomic<bool> aborted{false};

  auto worker = [&] {
    while (!aborted.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        rows[i] = process_example(pipe, pipe.examples[i]);
      } catch (const std::exception& e) {
        rows[i].status = "error";
        rows[i].error = e.what();
        if (errors.fetch_add(1) + 1 > allowed_errors) aborted.store(true);
      }
    }
  };

  const int threads =
      std::max(1, std::min<int>(pipe.config.parallelism, static_cast<int>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (aborted.load()) {
    throw RunAborted("run aborted: " + std::to_string(errors.load()) +
                     " example errors exceeded the quota of " +
                     std::to_string(allowed_errors));
  }
  return rows;
}

ordered_json example_to_json(const EvalExample& example,
                             const ExampleRow& row) {
  ordered_json node;
  node["id"] = example.id;
  node["status"] = row.status;
  if (row.used_retrieval) {
    node["query"] = row.query_string;
    ordered_json demos = ordered_json::array();
    for (const auto& demo : row.demos) {
      demos.push_back({{"doc_id", demo.doc_id},
                       {"score", demo.score},
                       {"label", demo.label},
                       {"rendered_label", demo.rendered_label}});
    }
    node["demos"] = demos;
  }
  node["prompt_hash"] = "fnv1a64:" + hex64(row.prompt_hash);
  node["raw_output"] = row.raw_output;
  node["prediction"] = row.prediction ? json(*row.prediction) : json(nullptr);
  node["gold"] =
      example.gold.size() == 1 ? json(example.gold.front()) : json(example.gold);
  if (!row.error.empty()) node["error"] = row.error;
  return node;
}

struct RunTimer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  long long elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

RunArtifacts write_outputs(const Pipeline& pipe,
                           const std::vector<ExampleRow>& rows,
                           const ordered_json& report,
                           const std::string& report_csv,
                           const ordered_json& metrics, long long wall_ms) {
  std::filesystem::create_directories(pipe.config.output_dir);
  RunArtifacts artifacts;
  artifacts.report_json = pipe.config.output_dir / "report.json";
  artifacts.report_csv = pipe.config.output_dir / "report.csv";
  artifacts.manifest_json = pipe.config.output_dir / "manifest.json";

  {
    std::ofstream out(artifacts.report_json, std::ios::binary);
    out << report.dump(2) << "\n";
  }
  {
    std::ofstream out(artifacts.report_csv, std::ios::binary);
    out << report_csv;
  }

  ordered_json manifest;
  manifest["schema"] = "crea.manifest.v1";
  manifest["task"] = std::string(to_string(pipe.config.task));
  manifest["config"] = config_snapshot(pipe.config);
  manifest["eval_fingerprint"] = pipe.eval_fingerprint;
  if (!pipe.corpus_fingerprint.empty()) {
    manifest["corpus_fingerprint"] = pipe.corpus_fingerprint;
  }
  manifest["template_hash"] = pipe.template_hash;
  manifest["metrics"] = metrics;
  manifest["request_counts"] = {
      {"embed", pipe.embed_calls.load()},
      {"generate", pipe.generate_calls.load()},
      {"mask_scores", pipe.mask_calls.load()}};
  ordered_json examples = ordered_json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    examples.push_back(example_to_json(pipe.examples[i], rows[i]));
  }
  manifest["examples"] = examples;
  manifest["timing"] = {{"wall_ms", wall_ms}};
  {
    std::ofstream out(artifacts.manifest_json, std::ios::binary);
    out << manifest.dump(2) << "\n";
  }
  return artifacts;
}

std::string csv_number(double v) { return json(v).dump(); }

}  // namespace

ClassificationRunResult run_classification(const ExperimentConfig& config) {
  if (config.task != TaskKind::classification) {
    throw ValidationError("run_classification: task is not classification");
  }
  RunTimer timer;
  Pipeline pipe;
  prepare(config, pipe);
  const auto rows = run_examples(pipe);

  std::vector<std::optional<std::string>> preds;
  std::vector<std::string> golds;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].status == "error") continue;
    preds.push_back(rows[i].prediction);
    golds.push_back(pipe.examples[i].gold_single());
  }
  if (preds.empty()) throw Error("no successfully scored examples");

  const ConfusionMatrix cm = confusion(preds, golds, *pipe.labels);
  const ClassificationReport report = classification_report(cm);

  ordered_json report_json;
  report_json["task"] = "classification";
  report_json["labels"] = pipe.labels->names();
  ordered_json per_class;
  for (const auto& m : report.per_class) {
    per_class[m.label] = {{"precision", m.precision},
                          {"recall", m.recall},
                          {"f1", m.f1},
                          {"support", m.support}};
  }
  report_json["per_class"] = per_class;
  report_json["abstentions"] = report.abstentions;
  report_json["accuracy"] = report.accuracy;
  report_json["macro_avg"] = {{"precision", report.macro_avg.precision},
                              {"recall", report.macro_avg.recall},
                              {"f1", report.macro_avg.f1}};
  report_json["weighted_avg"] = {{"precision", report.weighted_avg.precision},
                                 {"recall", report.weighted_avg.recall},
                                 {"f1", report.weighted_avg.f1}};
  report_json["total"] = report.total;
  ordered_json display;
  ordered_json display_classes;
  for (const auto& m : report.per_class) {
    display_classes[m.label] = {{"precision", fixed2(m.precision)},
                                {"recall", fixed2(m.recall)},
                                {"f1", fixed2(m.f1)}};
  }
  display["per_class"] = display_classes;
  display["accuracy"] = fixed2(report.accuracy);
  display["macro_avg"] = {{"precision", fixed2(report.macro_avg.precision)},
                          {"recall", fixed2(report.macro_avg.recall)},
                          {"f1", fixed2(report.macro_avg.f1)}};
  display["weighted_avg"] = {
      {"precision", fixed2(report.weighted_avg.precision)},
      {"recall", fixed2(report.weighted_avg.recall)},
      {"f1", fixed2(report.weighted_avg.f1)}};
  report_json["display"] = display;

  std::string csv = "section,label,metric,value\n";
  for (const auto& m : report.per_class) {
    csv += "per_class," + m.label + ",precision," + csv_number(m.precision) + "\n";
    csv += "per_class," + m.label + ",recall," + csv_number(m.recall) + "\n";
    csv += "per_class," + m.label + ",f1," + csv_number(m.f1) + "\n";
    csv += "per_class," + m.label + ",support," + std::to_string(m.support) + "\n";
  }
  csv += "summary,,accuracy," + csv_number(report.accuracy) + "\n";
  csv += "macro_avg,,precision," + csv_number(report.macro_avg.precision) + "\n";
  csv += "macro_avg,,recall," + csv_number(report.macro_avg.recall) + "\n";
  csv += "macro_avg,,f1," + csv_number(report.macro_avg.f1) + "\n";
  csv += "weighted_avg,,precision," + csv_number(report.weighted_avg.precision) + "\n";
  csv += "weighted_avg,,recall," + csv_number(report.weighted_avg.recall) + "\n";
  csv += "weighted_avg,,f1," + csv_number(report.weighted_avg.f1) + "\n";
  csv += "summary,,abstentions," + std::to_string(report.abstentions) + "\n";

  ordered_json metrics;
  metrics["accuracy"] = report.accuracy;
  metrics["macro_avg"] = report_json["macro_avg"];
  metrics["weighted_avg"] = report_json["weighted_avg"];

  ClassificationRunResult result;
  result.report = report;
  result.artifacts = write_outputs(pipe, rows, report_json, csv, metrics,
                                   timer.elapsed_ms());
  return result;
}

namespace {

ordered_json rouge_to_json(const RougeScores& scores) {
  return {{"r1", scores.r1},
          {"r2", scores.r2},
          {"rl", scores.rl},
          {"rlsum", scores.rlsum}};
}

ordered_json rouge_display(const RougeScores& scores, bool x100) {
  const double scale = x100 ? 100.0 : 1.0;
  return {{"r1", fixed2(scores.r1 * scale)},
          {"r2", fixed2(scores.r2 * scale)},
          {"rl", fixed2(scores.rl * scale)},
          {"rlsum", fixed2(scores.rlsum * scale)}};
}

}  // namespace

SummarizationRunResult run_summarization(const ExperimentConfig& config) {
  if (config.task != TaskKind::summarization) {
    throw ValidationError("run_summarization: task is not summarization");
  }
  RunTimer timer;
  Pipeline pipe;
  prepare(config, pipe);
  const auto rows = run_examples(pipe);

  RougeScores model_sum;
  RougeScores lead_sum;
  long long scored = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].status != "ok") continue;
    const std::string& reference = pipe.examples[i].gold_single();
    const RougeScores model = rouge_all(*rows[i].prediction, reference);
    const RougeScores lead = rouge_all(lead_n(pipe.examples[i].text), reference);
    model_sum.r1 += model.r1;
    model_sum.r2 += model.r2;
    model_sum.rl += model.rl;
    model_sum.rlsum += model.rlsum;
    lead_sum.r1 += lead.r1;
    lead_sum.r2 += lead.r2;
    lead_sum.rl += lead.rl;
    lead_sum.rlsum += lead.rlsum;
    ++scored;
  }
  if (scored == 0) throw Error("no successfully scored examples");
  const auto mean = [scored](RougeScores s) {
    s.r1 /= scored;
    s.r2 /= scored;
    s.rl /= scored;
    s.rlsum /= scored;
    return s;
  };
  const RougeScores model = mean(model_sum);
  const RougeScores lead64 = mean(lead_sum);

  ordered_json report_json;
  report_json["task"] = "summarization";
  report_json["examples"] = scored;
  report_json["model"] = rouge_to_json(model);
  report_json["lead64"] = rouge_to_json(lead64);
  report_json["display"] = {
      {"model", rouge_display(model, config.display_x100)},
      {"lead64", rouge_display(lead64, config.display_x100)}};

  std::string csv = "section,label,metric,value\n";
  for (const auto& [name, scores] :
       std::vector<std::pair<std::string, RougeScores>>{{"model", model},
                                                        {"lead64", lead64}}) {
    csv += name + ",,r1," + csv_number(scores.r1) + "\n";
    csv += name + ",,r2," + csv_number(scores.r2) + "\n";
    csv += name + ",,rl," + csv_number(scores.rl) + "\n";
    csv += name + ",,rlsum," + csv_number(scores.rlsum) + "\n";
  }

  ordered_json metrics;
  metrics["model"] = rouge_to_json(model);
  metrics["lead64"] = rouge_to_json(lead64);

  SummarizationRunResult result;
  result.model = model;
  result.lead64 = lead64;
  result.artifacts = write_outputs(pipe, rows, report_json, csv, metrics,
                                   timer.elapsed_ms());
  return result;
}

QaRunResult run_qa(const ExperimentConfig& config) {
  if (config.task != TaskKind::qa) {
    throw ValidationError("run_qa: task is not qa");
  }
  RunTimer timer;
  Pipeline pipe;
  prepare(config, pipe);
  const auto rows = run_examples(pipe);

  double em_sum = 0.0;
  double f1_sum = 0.0;
  long long scored = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].status != "ok") continue;
    const auto score =
        qa_scores(*rows[i].prediction, pipe.examples[i].gold, config.qa_profile);
    em_sum += score.em;
    f1_sum += score.f1;
    ++scored;
  }
  if (scored == 0) throw Error("no successfully scored examples");

  QaScores scores;
  scores.em = em_sum / scored;
  scores.f1 = f1_sum / scored;

  ordered_json report_json;
  report_json["task"] = "qa";
  report_json["examples"] = scored;
  report_json["em"] = scores.em;
  report_json["f1"] = scores.f1;
  // Table-style percent display.
  report_json["display"] = {{"em", fixed2(scores.em * 100.0)},
                            {"f1", fixed2(scores.f1 * 100.0)}};

  std::string csv = "section,label,metric,value\n";
  csv += "qa,,em," + csv_number(scores.em) + "\n";
  csv += "qa,,f1," + csv_number(scores.f1) + "\n";

  ordered_json metrics;
  metrics["em"] = scores.em;
  metrics["f1"] = scores.f1;

  QaRunResult result;
  result.scores = scores;
  result.artifacts = write_outputs(pipe, rows, report_json, csv, metrics,
                                   timer.elapsed_ms());
  return result;
}

RunArtifacts run_experiment(const ExperimentConfig& config) {
  switch (config.task) {
    case TaskKind::classification:
      return run_classification(config).artifacts;
    case TaskKind::summarization:
      return run_summarization(config).artifacts;
    case TaskKind::qa:
      return run_qa(config).artifacts;
  }
  throw ValidationError("unknown task");
}

SweepResult template_sweep(const std::vector<ExperimentConfig>& configs,
                           const std::filesystem::path& output_dir) {
  if (configs.size() < 2) {
    throw ValidationError("template_sweep needs at least 2 configs");
  }
  const auto normalized = [](const ExperimentConfig& config) {
    ordered_json snap = config_snapshot(config);
    snap.erase("template_id");
    snap.erase("template_file");
    snap.erase("output_dir");
    return snap.dump();
  };
  const std::string reference = normalized(configs.front());
  for (const auto& config : configs) {
    if (config.task != TaskKind::classification) {
      throw ValidationError("template_sweep supports classification configs");
    }
    if (normalized(config) != reference) {
      throw ValidationError(
          "template_sweep configs must differ only in template");
    }
  }

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ExperimentConfig config = configs[i];
    const std::string name =
        config.template_id.empty()
            ? load_template_file(config.template_file).template_id
            : config.template_id;
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "run_%03zu", i);
    config.output_dir = output_dir / (std::string(suffix) + "_" + name);
    const auto result = run_classification(config);
    rows.push_back({name, result.report.macro_avg.f1,
                    result.report.weighted_avg.f1, result.report.accuracy});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     return a.template_id < b.template_id;
                   });

  std::filesystem::create_directories(output_dir);
  SweepResult result;
  result.rows = rows;
  result.csv_path = output_dir / "sweep.csv";
  result.json_path = output_dir / "sweep.json";

  // Boxplot-ready triples: one row per template, f1 = macro F1 of the run.
  std::string csv = "template_id,setting,f1\n";
  const std::string setting = "k=" + std::to_string(configs.front().k);
  for (const auto& row : rows) {
    csv += row.template_id + "," + setting + "," + csv_number(row.macro_f1) + "\n";
  }
  {
    std::ofstream out(result.csv_path, std::ios::binary);
    out << csv;
  }

  ordered_json table = ordered_json::array();
  for (const auto& row : rows) {
    table.push_back({{"template_id", row.template_id},
                     {"macro_f1", row.macro_f1},
                     {"weighted_f1", row.weighted_f1},
                     {"accuracy", row.accuracy}});
  }
  {
    std::ofstream out(result.json_path, std::ios::binary);
    out << table.dump(2) << "\n";
  }
  return result;
}

namespace {

void flatten_metrics(const json& node, const std::string& prefix,
                     std::map<std::string, double>& out) {
  if (node.is_number()) {
    out[prefix] = node.get<double>();
    return;
  }
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten_metrics(value, prefix.empty() ? key : prefix + "." + key, out);
    }
  }
}

}  // namespace

CompareResult compare_runs(
    const std::vector<std::filesystem::path>& manifest_paths) {
  if (manifest_paths.size() < 2) {
    throw ValidationError("compare_runs needs at least 2 manifests");
  }

  std::vector<json> manifests;
  for (const auto& path : manifest_paths) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest: " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw ValidationError("malformed manifest: " + path.string());
    }
    manifests.push_back(std::move(doc));
  }

  const std::string fingerprint =
      manifests.front().value("eval_fingerprint", std::string{});
  for (std::size_t i = 1; i < manifests.size(); ++i) {
    if (manifests[i].value("eval_fingerprint", std::string{}) != fingerprint) {
      throw ValidationError("manifests do not share an eval set: " +
                            manifest_paths[i].string());
    }
  }

  CompareResult result;
  for (const auto& path : manifest_paths) {
    result.manifests.push_back(path.string());
  }

  std::map<std::string, double> baseline_metrics;
  flatten_metrics(manifests.front().value("metrics", json::object()), "",
                  baseline_metrics);
  for (std::size_t run = 1; run < manifests.size(); ++run) {
    std::map<std::string, double> run_metrics;
    flatten_metrics(manifests[run].value("metrics", json::object()), "",
                    run_metrics);
    for (const auto& [metric, base] : baseline_metrics) {
      auto it = run_metrics.find(metric);
      if (it == run_metrics.end()) continue;
      result.metric_deltas.push_back(
          {run, metric, base, it->second, it->second - base});
    }
  }

  // Per-example prediction diffs, in the baseline's example order.
  std::vector<std::map<std::string, std::optional<std::string>>> predictions;
  for (const auto& manifest : manifests) {
    std::map<std::string, std::optional<std::string>> by_id;
    for (const auto& example : manifest.value("examples", json::array())) {
      const std::string id = example.value("id", std::string{});
      if (example.contains("prediction") && !example["prediction"].is_null()) {
        by_id[id] = example["prediction"].get<std::string>();
      } else {
        by_id[id] = std::nullopt;
      }
    }
    predictions.push_back(std::move(by_id));
  }
  for (const auto& example : manifests.front().value("examples", json::array())) {
    const std::string id = example.value("id", std::string{});
    std::vector<std::optional<std::string>> per_run;
    bool differs = false;
    for (const auto& by_id : predictions) {
      auto it = by_id.find(id);
      per_run.push_back(it == by_id.end() ? std::nullopt : it->second);
      if (per_run.back() != per_run.front()) differs = true;
    }
    if (differs) result.prediction_diffs.push_back({id, std::move(per_run)});
  }
  return result;
}

std::string compare_result_to_json(const CompareResult& result) {
  ordered_json doc;
  doc["manifests"] = result.manifests;
  ordered_json deltas = ordered_json::array();
  for (const auto& delta : result.metric_deltas) {
    deltas.push_back({{"run", delta.run_index},
                      {"metric", delta.metric},
                      {"baseline", delta.baseline},
                      {"value", delta.value},
                      {"delta", delta.delta}});
  }
  doc["metric_deltas"] = deltas;
  ordered_json diffs = ordered_json::array();
  for (const auto& diff : result.prediction_diffs) {
    ordered_json preds = ordered_json::array();
    for (const auto& p : diff.predictions) {
      preds.push_back(p ? ordered_json(*p) : ordered_json(nullptr));
    }
    diffs.push_back({{"id", diff.id}, {"predictions", preds}});
  }
  doc["prediction_diffs"] = diffs;
  return doc.dump(2) + "\n";
}

}  // namespace crea
