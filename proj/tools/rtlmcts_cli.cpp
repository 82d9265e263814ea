#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "rtlmcts/errors.hpp"
#include "rtlmcts/experiment.hpp"
#include "rtlmcts/remote_model.hpp"

using namespace rtlmcts;

namespace {

// Flags shared by the experiment-style subcommands. Anything set here
// overrides the config file, which overrides the built-in defaults.
struct CommonFlags {
  std::string config;
  std::vector<std::string> tasks;
  std::vector<std::string> task_files;
  std::string output;
  std::optional<std::size_t> iterations;
  std::optional<double> c_puct;
  std::optional<std::size_t> k;
  std::optional<double> alpha_b;
  std::optional<std::size_t> t_max;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> workers;
  std::string endpoint;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "experiment config (JSON)")->check(CLI::ExistingFile);
    app->add_option("-t,--task", tasks, "builtin toy task, e.g. redundant-logic:0 (repeatable)");
    app->add_option("--task-file", task_files, "toy task JSON file (repeatable)")->check(CLI::ExistingFile);
    app->add_option("-o,--output", output, "output directory");
    app->add_option("-n,--iterations", iterations, "MCTS iteration budget");
    app->add_option("--c-puct", c_puct, "exploration constant");
    app->add_option("-k,--top-k", k, "expansion branching factor");
    app->add_option("--alpha-b", alpha_b, "baseline reward for functional code");
    app->add_option("--t-max", t_max, "maximum generated tokens for external tasks");
    app->add_option("-s,--seed", seeds, "seed (repeatable)");
    app->add_option("-j,--workers", workers, "tasks run in parallel");
    app->add_option("--endpoint", endpoint, "remote model server URL");
  }

  nlohmann::json overrides() const {
    nlohmann::json j = nlohmann::json::object();
    if (!tasks.empty() || !task_files.empty()) {
      j["tasks"] = nlohmann::json::array();
      for (const auto& t : tasks) j["tasks"].push_back(t);
      for (const auto& f : task_files) j["tasks"].push_back({{"toy_file", std::filesystem::absolute(f).string()}});
    }
    if (!output.empty()) j["output_dir"] = std::filesystem::absolute(output).string();
    if (iterations) j["search"]["iterations"] = *iterations;
    if (c_puct) j["search"]["c_puct"] = *c_puct;
    if (k) j["search"]["k"] = *k;
    if (alpha_b) j["search"]["reward"]["alpha_b"] = *alpha_b;
    if (t_max) j["search"]["t_max"] = *t_max;
    if (!seeds.empty()) j["seeds"] = seeds;
    if (workers) j["workers"] = *workers;
    if (!endpoint.empty()) j["model"]["endpoint_url"] = endpoint;
    return j;
  }

  ExperimentConfig load(const nlohmann::json& extra = nlohmann::json::object()) const {
    const auto o = merge_json(overrides(), extra);
    if (!config.empty()) return load_experiment_config(config, o);
    return experiment_config_from_json(o);
  }
};

void print_summary(const RunReport& report, const std::filesystem::path& dir) {
  for (const auto& r : report.rows) {
    std::printf("%-20s %-12s seed=%-3llu functional=%-3s adp=%-8s reward=%.4f first_functional=%s%s\n", r.task.c_str(),
                r.method.c_str(), static_cast<unsigned long long>(r.seed), r.functional ? "yes" : "no",
                r.best_adp ? std::to_string(*r.best_adp).c_str() : "-", r.best_reward,
                r.first_functional_iteration ? std::to_string(*r.first_functional_iteration).c_str() : "none",
                r.error ? (" error: " + *r.error).c_str() : "");
  }
  std::printf("report: %s\n", (dir / "report.json").string().c_str());
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto piece = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!piece.empty()) out.push_back(std::stod(piece));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCTS-guided decoding for area-delay optimized netlists"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "run an experiment batch");
  run_flags.attach(run);
  std::vector<std::string> run_methods;
  run->add_option("-m,--method", run_methods, "methods to run (mcts, greedy, beam)");

  CommonFlags search_flags;
  auto* search_cmd = app.add_subcommand("search", "run MCTS on a single task");
  search_flags.attach(search_cmd);

  CommonFlags baseline_flags;
  auto* baseline = app.add_subcommand("baseline", "run greedy or beam decoding on a task");
  baseline_flags.attach(baseline);
  std::string baseline_method = "greedy";
  std::optional<std::size_t> beam_width;
  baseline->add_option("-m,--method", baseline_method, "greedy or beam")->check(CLI::IsMember({"greedy", "beam"}));
  baseline->add_option("-w,--beam-width", beam_width, "beam width");

  CommonFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep-alpha", "vary the baseline reward on one task");
  sweep_flags.attach(sweep);
  std::string alphas = "0.1,0.5,1.0";
  sweep->add_option("--alphas", alphas, "comma-separated alpha_b values");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "re-render tables and curves from a finished run");
  report->add_option("dir", report_dir, "run output directory")->required()->check(CLI::ExistingDirectory);

  std::string serve_endpoint;
  double serve_timeout = 10.0;
  auto* serve = app.add_subcommand("serve-check", "ping a model server and fetch one prediction");
  serve->add_option("endpoint", serve_endpoint, "server URL, e.g. http://127.0.0.1:8000")->required();
  serve->add_option("--timeout", serve_timeout, "seconds");

  auto* list = app.add_subcommand("tasks", "list builtin toy tasks");
  std::string export_dir;
  list->add_option("--export", export_dir, "write each task as JSON into this directory");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run) {
      nlohmann::json extra = nlohmann::json::object();
      if (!run_methods.empty()) extra["methods"] = run_methods;
      const auto config = run_flags.load(extra);
      const auto rep = run_experiment(config);
      print_summary(rep, config.output_dir);
      std::printf("tables: %s\n", (config.output_dir / "tables.md").string().c_str());
    } else if (*search_cmd) {
      const auto config = search_flags.load({{"methods", {"mcts"}}});
      print_summary(run_experiment(config), config.output_dir);
    } else if (*baseline) {
      nlohmann::json extra{{"methods", {baseline_method}}};
      if (beam_width) extra["beam_width"] = *beam_width;
      const auto config = baseline_flags.load(extra);
      print_summary(run_experiment(config), config.output_dir);
    } else if (*sweep) {
      const auto config = sweep_flags.load();
      const auto rows = sweep_baseline_reward(config, parse_list(alphas));
      std::filesystem::create_directories(config.output_dir);
      std::ofstream(config.output_dir / "sweep.json") << to_json(rows).dump(2) << '\n';
      const auto table = render_sweep_table(rows);
      std::ofstream(config.output_dir / "sweep.md") << table;
      std::cout << "task: " << config.tasks.front().name() << "\n" << table;
    } else if (*report) {
      rerender_reports(report_dir);
      std::ifstream in(std::filesystem::path(report_dir) / "tables.md");
      std::cout << in.rdbuf();
    } else if (*serve) {
      RemoteModelConfig rc;
      rc.endpoint_url = serve_endpoint;
      rc.timeout = std::chrono::milliseconds(static_cast<long long>(serve_timeout * 1000.0));
      rc.retry_count = 0;
      const auto check = check_server(rc);
      if (!check.healthy) {
        std::fprintf(stderr, "unhealthy: %s\n", check.message.c_str());
        return 1;
      }
      std::printf("healthy: vocab=%zu top1=%s p=%.6f\n", check.vocab_size, nlohmann::json(check.first_token).dump().c_str(),
                  check.first_prob);
    } else if (*list) {
      if (!export_dir.empty()) std::filesystem::create_directories(export_dir);
      for (const auto& n : builtin_task_names()) {
        if (!export_dir.empty()) {
          auto file = n;
          std::replace(file.begin(), file.end(), ':', '-');
          std::ofstream(std::filesystem::path(export_dir) / (file + ".json")) << to_json(builtin_task(n)).dump(2) << '\n';
        }
        std::printf("%s\n", n.c_str());
      }
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
