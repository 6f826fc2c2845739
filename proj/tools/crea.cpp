// crea: batch experiment driver for cross-lingual retrieval-augmented
// in-context learning. Subcommands: run, sweep, compare, serve-mock.

#include <glob.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <semaphore>

#include "CLI11.hpp"
#include "crea/mock_backend.hpp"
#include "crea/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRunAborted = 2;

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  glob_t results{};
  std::vector<std::filesystem::path> paths;
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &results);
  if (rc == 0) {
    for (std::size_t i = 0; i < results.gl_pathc; ++i) {
      paths.emplace_back(results.gl_pathv[i]);
    }
  } else if (rc != GLOB_NOMATCH) {
    globfree(&results);
    throw crea::ValidationError("glob failed for pattern: " + pattern);
  }
  globfree(&results);
  return paths;
}

std::binary_semaphore g_shutdown{0};

void handle_signal(int) { g_shutdown.release(); }

int run_command(const std::string& config_path, std::optional<int> k,
                const std::string& template_id, const std::string& output_dir) {
  crea::ExperimentConfig config =
      crea::load_experiment_config(config_path);
  if (k) config.k = *k;
  if (!template_id.empty()) {
    config.template_id = template_id;
    config.template_file.clear();
  }
  if (!output_dir.empty()) config.output_dir = output_dir;
  crea::apply_env_overrides(config);

  crea::RunArtifacts artifacts;
  switch (config.task) {
    case crea::TaskKind::classification: {
      const auto result = crea::run_classification(config);
      artifacts = result.artifacts;
      std::cout << "accuracy " << result.report.accuracy << "  macro_f1 "
                << result.report.macro_avg.f1 << "  weighted_f1 "
                << result.report.weighted_avg.f1 << "\n";
      break;
    }
    case crea::TaskKind::summarization: {
      const auto result = crea::run_summarization(config);
      artifacts = result.artifacts;
      std::cout << "model   r1 " << result.model.r1 << "  r2 "
                << result.model.r2 << "  rl " << result.model.rl << "  rlsum "
                << result.model.rlsum << "\n"
                << "lead64  r1 " << result.lead64.r1 << "  r2 "
                << result.lead64.r2 << "  rl " << result.lead64.rl
                << "  rlsum " << result.lead64.rlsum << "\n";
      break;
    }
    case crea::TaskKind::qa: {
      const auto result = crea::run_qa(config);
      artifacts = result.artifacts;
      std::cout << "em " << result.scores.em * 100.0 << "  f1 "
                << result.scores.f1 * 100.0 << "\n";
      break;
    }
  }
  std::cout << "report:   " << artifacts.report_json.string() << "\n"
            << "csv:      " << artifacts.report_csv.string() << "\n"
            << "manifest: " << artifacts.manifest_json.string() << "\n";
  return kExitOk;
}

int sweep_command(const std::vector<std::string>& patterns,
                  const std::string& output_dir) {
  std::vector<std::filesystem::path> config_paths;
  for (const auto& pattern : patterns) {
    auto expanded = expand_glob(pattern);
    if (expanded.empty() && std::filesystem::exists(pattern)) {
      expanded.emplace_back(pattern);
    }
    config_paths.insert(config_paths.end(), expanded.begin(), expanded.end());
  }
  if (config_paths.empty()) {
    throw crea::ValidationError("sweep: no config files matched");
  }

  std::vector<crea::ExperimentConfig> configs;
  for (const auto& path : config_paths) {
    auto config = crea::load_experiment_config(path);
    crea::apply_env_overrides(config);
    configs.push_back(std::move(config));
  }
  const auto result = crea::template_sweep(
      configs, output_dir.empty() ? "sweep_out" : output_dir);

  std::cout << "template_id,setting,f1\n";
  for (const auto& row : result.rows) {
    std::cout << row.template_id << ",k=" << configs.front().k << ","
              << row.macro_f1 << "\n";
  }
  std::cout << "sweep table: " << result.csv_path.string() << "\n";
  return kExitOk;
}

int compare_command(const std::vector<std::string>& manifests,
                    const std::string& output_path) {
  std::vector<std::filesystem::path> paths(manifests.begin(), manifests.end());
  const auto result = crea::compare_runs(paths);
  const std::string body = crea::compare_result_to_json(result);
  if (!output_path.empty()) {
    std::ofstream out(output_path, std::ios::binary);
    out << body;
    std::cout << "delta report: " << output_path << "\n";
  } else {
    std::cout << body;
  }
  return kExitOk;
}

int serve_mock_command(const std::string& rules_path, int port) {
  crea::MockRules rules = rules_path.empty()
                              ? crea::MockRules{}
                              : crea::mock_rules_from_file(rules_path);
  crea::MockServer server(std::move(rules));
  const int bound = server.start(port);
  std::cout << "mock backend listening on http://127.0.0.1:" << bound
            << " (/generate /mask_scores /embed); Ctrl-C to stop\n";
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  g_shutdown.acquire();
  server.stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-lingual retrieval-augmented ICL experiment driver"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> k_override;
  std::string template_override;
  std::string output_override;
  auto* run = app.add_subcommand("run", "execute one experiment config");
  run->add_option("--config", config_path, "experiment config JSON")
      ->required();
  run->add_option("--k", k_override, "override demonstration count");
  run->add_option("--template", template_override, "override template id");
  run->add_option("--output", output_override, "override output directory");

  std::vector<std::string> sweep_patterns;
  std::string sweep_output;
  auto* sweep = app.add_subcommand(
      "sweep", "run several configs differing only in template");
  sweep->add_option("--configs", sweep_patterns,
                    "config files or glob patterns")
      ->required()
      ->expected(-1);
  sweep->add_option("--output", sweep_output, "sweep output directory");

  std::vector<std::string> compare_manifests;
  std::string compare_output;
  auto* compare =
      app.add_subcommand("compare", "diff metrics across run manifests");
  compare->add_option("manifests", compare_manifests, "manifest.json paths")
      ->required()
      ->expected(-1);
  compare->add_option("--output", compare_output, "write the delta report here");

  std::string rules_path;
  int port = 0;
  auto* serve = app.add_subcommand("serve-mock",
                                   "serve the deterministic mock backend");
  serve->add_option("--rules", rules_path, "mock rules JSON");
  serve->add_option("--port", port, "port (0 picks a free one)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_command(config_path, k_override, template_override,
                         output_override);
    }
    if (sweep->parsed()) return sweep_command(sweep_patterns, sweep_output);
    if (compare->parsed()) {
      return compare_command(compare_manifests, compare_output);
    }
    if (serve->parsed()) return serve_mock_command(rules_path, port);
  } catch (const crea::RunAborted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunAborted;
  } catch (const crea::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}
