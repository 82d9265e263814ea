#include "rtlmcts/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "rtlmcts/baselines.hpp"
#include "rtlmcts/errors.hpp"
#include "rtlmcts/hashing.hpp"

namespace rtlmcts {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string safe_name(std::string s) {
  for (auto& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
nlohmann::json opt(const std::optional<std::size_t>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::optional<std::size_t> opt_size(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::size_t>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

TaskSpec task_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  TaskSpec t;
  if (j.is_string()) {
    t.toy = builtin_task(j.get<std::string>());
  } else if (j.contains("builtin")) {
    t.toy = builtin_task(j.at("builtin").get<std::string>());
  } else if (j.contains("toy_file")) {
    t.toy = load_toy_task(resolve(base_dir, j.at("toy_file").get<std::string>()));
  } else if (j.contains("toy")) {
    t.toy = toy_task_from_json(j.at("toy"), base_dir);
  } else {
    ExternalTaskSpec e;
    e.name = j.at("name").get<std::string>();
    e.kind = j.value("kind", e.name);
    e.bit_width = j.value("width", 0);
    e.prompt_file = resolve(base_dir, j.at("prompt_file").get<std::string>());
    if (!std::filesystem::exists(e.prompt_file)) throw ConfigError("prompt file not found: " + e.prompt_file.string());
    e.tools = ToolCommands::from_json(j.at("tools"), base_dir);
    if (!e.tools.testbench.empty() && !std::filesystem::exists(e.tools.testbench)) {
      throw ConfigError("testbench not found: " + e.tools.testbench);
    }
    if (j.contains("model_file")) {
      e.model_file = resolve(base_dir, j.at("model_file").get<std::string>());
      if (!std::filesystem::exists(*e.model_file)) throw ConfigError("model file not found: " + e.model_file->string());
    }
    t.external = std::move(e);
  }
  if (t.toy) t.toy->model->vocabulary().tokenize(t.toy->prompt);
  return t;
}

nlohmann::json config_summary(const ExperimentConfig& c) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : c.tasks) {
    if (t.toy) {
      tasks.push_back({{"name", t.toy->name}, {"model", t.toy->model->id()}, {"circuit", t.toy->circuit.to_json()}});
    } else {
      tasks.push_back({{"name", t.external->name}, {"tools", t.external->tools.to_json()}});
      tasks.back()["tools"].erase("work_root");
    }
  }
  nlohmann::json methods = nlohmann::json::array();
  for (auto m : c.methods) methods.push_back(to_string(m));
  return {{"tasks", tasks},
          {"methods", methods},
          {"search", to_json(c.search)},
          {"beam_width", c.beam_width},
          {"seeds", c.seeds},
          {"composition", to_json(c.composition)},
          {"compare_without_composition", c.compare_without_composition}};
}

struct TaskRuntime {
  std::shared_ptr<const TokenModel> model;
  std::unique_ptr<Evaluator> evaluator;
  std::string base_prompt;
  std::size_t t_max = 0;
  std::string code_ext;
};

TaskRuntime make_runtime(const ExperimentConfig& config, const TaskSpec& task) {
  TaskRuntime rt;
  if (task.toy) {
    rt.model = std::make_shared<const CachingModel>(task.toy->model);
    rt.evaluator = std::make_unique<ToyEvaluator>(task.toy->circuit);
    rt.base_prompt = task.toy->prompt;
    rt.t_max = task.toy->t_max;
    rt.code_ext = ".toy";
    return rt;
  }
  const auto& e = *task.external;
  if (e.model_file) {
    rt.model = std::make_shared<const CachingModel>(ToyGrammarModel::load(*e.model_file));
  } else if (config.model) {
    rt.model = make_remote_model(*config.model);
  } else {
    throw ConfigError("task '" + e.name + "' needs a model_file or an experiment-level model endpoint");
  }
  auto tools = e.tools;
  if (tools.work_root == ToolCommands{}.work_root) tools.work_root = config.output_dir / "work" / safe_name(e.name);
  rt.evaluator = std::make_unique<ToolEvaluator>(std::move(tools));
  rt.base_prompt = read_file(e.prompt_file);
  rt.t_max = config.search.t_max;
  rt.code_ext = ".v";
  return rt;
}

void write_log(const std::filesystem::path& path, const std::vector<IterationRecord>& log) {
  std::string out;
  for (const auto& r : log) out += to_jsonl_record(r).dump() + "\n";
  write_file(path, out);
}

void fill_outcome(RunRow& row, const EvaluationOutcome& o) {
  row.functional = o.functional;
  if (o.functional) {
    row.best_area = o.area;
    row.best_delay = o.delay;
    row.best_adp = o.adp();
  }
}

struct TaskResult {
  std::vector<RunRow> rows;
  std::vector<CompositionRow> composition;
};

class Runner {
 public:
  Runner(const ExperimentConfig& config, ModuleLibrary& library, std::string run_id)
      : config_(config), library_(library), run_id_(std::move(run_id)) {}

  TaskResult run_task(const TaskSpec& task) {
    TaskResult result;
    const auto& name = task.name();
    std::unique_ptr<TaskRuntime> rt;
    try {
      rt = std::make_unique<TaskRuntime>(make_runtime(config_, task));
    } catch (const std::exception& e) {
      spdlog::error("task {}: {}", name, e.what());
      for (auto m : config_.methods) {
        RunRow row;
        row.task = name;
        row.method = to_string(m);
        row.seed = config_.seeds.front();
        row.error = e.what();
        result.rows.push_back(std::move(row));
      }
      return result;
    }

    const auto key = task.key();
    const bool composed_task =
        config_.composition.is_large(key.bit_width) && config_.composition.dependencies.count(key) > 0;
    ComposedPrompt composed{rt->base_prompt, {}, {}};
    if (composed_task) composed = compose_prompt(rt->base_prompt, key, library_, config_.composition);
    std::vector<std::string> injected;
    for (const auto& k : composed.injected) injected.push_back(to_string(k));

    for (auto m : config_.methods) {
      if (m == Method::Mcts) {
        for (auto seed : config_.seeds) {
          auto row = guarded(name, "mcts", seed, [&] { return run_mcts(task, *rt, composed.text, "mcts", seed, true); });
          row.injected = injected;
          result.rows.push_back(std::move(row));
          if (composed_task && config_.compare_without_composition) {
            auto plain = guarded(name, "mcts-nocomp", seed,
                                 [&] { return run_mcts(task, *rt, rt->base_prompt, "mcts-nocomp", seed, false); });
            CompositionRow c;
            c.task = name;
            c.seed = seed;
            c.injected = injected;
            for (const auto& k : composed.missing) c.missing.push_back(to_string(k));
            const auto& with = result.rows.back();
            c.with_first_functional = with.first_functional_iteration;
            c.with_rate_per_min = with.iteration_rate_per_min;
            c.without_first_functional = plain.first_functional_iteration;
            c.without_rate_per_min = plain.iteration_rate_per_min;
            result.composition.push_back(std::move(c));
            result.rows.push_back(std::move(plain));
          }
        }
      } else {
        const auto method = to_string(m);
        auto row = guarded(name, method, config_.seeds.front(),
                           [&] { return run_baseline(task, *rt, composed.text, m); });
        row.injected = injected;
        result.rows.push_back(std::move(row));
      }
    }
    return result;
  }

 private:
  template <typename F>
  RunRow guarded(const std::string& task, const std::string& method, std::uint64_t seed, F&& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      spdlog::error("task {} method {}: {}", task, method, e.what());
      RunRow row;
      row.task = task;
      row.method = method;
      row.seed = seed;
      row.error = e.what();
      return row;
    }
  }

  std::string stem(const std::string& task, const std::string& method, std::uint64_t seed) const {
    auto s = "runs/" + safe_name(task) + "/" + method;
    if (method.starts_with("mcts") && config_.seeds.size() > 1) s += "-seed" + std::to_string(seed);
    return s;
  }

  RunRow run_mcts(const TaskSpec& task, const TaskRuntime& rt, const std::string& prompt_text,
                  const std::string& method, std::uint64_t seed, bool store) {
    auto cfg = config_.search;
    cfg.seed = seed;
    cfg.t_max = rt.t_max;
    EvaluationCache cache;
    const auto prompt = make_prompt(prompt_text, rt.model->vocabulary());
    const auto result = search(prompt, *rt.model, *rt.evaluator, cache, cfg);

    RunRow row;
    row.task = task.name();
    row.method = method;
    row.seed = seed;
    fill_outcome(row, result.best_outcome);
    row.best_reward = result.best_reward;
    row.first_functional_iteration = result.first_functional_iteration;
    row.iterations_run = result.iterations_run;
    row.iteration_rate_per_min = result.iteration_rate_per_min;
    row.wall_seconds = result.wall_seconds;
    for (const auto& r : result.per_iteration_log) row.functional_by_iteration.push_back(r.outcome.functional);

    const auto base = stem(row.task, method, seed);
    row.log_path = base + ".jsonl";
    row.best_code_path = base + ".best" + rt.code_ext;
    const auto code = render(*result.best_state);
    write_log(config_.output_dir / row.log_path, result.per_iteration_log);
    write_file(config_.output_dir / row.best_code_path, code);

    if (store && result.best_outcome.functional) {
      ModuleRecord rec;
      rec.name = row.task;
      rec.kind = task.key().kind;
      rec.bit_width = task.key().bit_width;
      rec.code_text = code;
      rec.outcome = result.best_outcome;
      rec.outcome.artifacts.clear();
      rec.reward = result.best_reward;
      rec.run_id = run_id_;
      rec.iteration = result.best_iteration;
      if (rec.bit_width > 0) library_.store(rec);
    }
    return row;
  }

  RunRow run_baseline(const TaskSpec& task, const TaskRuntime& rt, const std::string& prompt_text, Method m) {
    EvaluationCache cache;
    const auto prompt = make_prompt(prompt_text, rt.model->vocabulary());
    const auto run = m == Method::Greedy
                         ? run_greedy_baseline(prompt, *rt.model, *rt.evaluator, cache, config_.search.reward, rt.t_max)
                         : run_beam_baseline(prompt, *rt.model, *rt.evaluator, cache, config_.search.reward,
                                             config_.beam_width, rt.t_max);
    RunRow row;
    row.task = task.name();
    row.method = to_string(m);
    row.seed = config_.seeds.front();
    fill_outcome(row, run.outcome);
    row.best_reward = run.reward;
    row.iterations_run = run.log.size();
    row.wall_seconds = run.wall_seconds;
    row.iteration_rate_per_min =
        run.wall_seconds > 0.0 ? static_cast<double>(run.log.size()) * 60.0 / run.wall_seconds : 0.0;
    for (const auto& r : run.log) {
      row.functional_by_iteration.push_back(r.outcome.functional);
      if (r.outcome.functional && !row.first_functional_iteration) row.first_functional_iteration = r.iter;
    }
    const auto base = stem(row.task, row.method, row.seed);
    row.log_path = base + ".jsonl";
    row.best_code_path = base + ".best" + rt.code_ext;
    write_log(config_.output_dir / row.log_path, run.log);
    write_file(config_.output_dir / row.best_code_path, render(run.best_state()));
    return row;
  }

  const ExperimentConfig& config_;
  ModuleLibrary& library_;
  std::string run_id_;
};

// Level 0 tasks have no dependency among the configured tasks.
std::vector<std::size_t> dependency_levels(const ExperimentConfig& config) {
  const auto n = config.tasks.size();
  std::vector<std::size_t> level(n, 0);
  for (std::size_t round = 0; round < n; ++round) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto key = config.tasks[i].key();
      if (!config.composition.is_large(key.bit_width)) continue;
      const auto it = config.composition.dependencies.find(key);
      if (it == config.composition.dependencies.end()) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto other = config.tasks[j].key();
        if (std::find(it->second.begin(), it->second.end(), other) != it->second.end() && level[i] <= level[j]) {
          level[i] = level[j] + 1;
          changed = true;
        }
      }
    }
    if (!changed) return level;
  }
  throw ConfigError("task dependencies form a cycle");
}

nlohmann::json row_to_json(const RunRow& r) {
  nlohmann::json j{{"task", r.task},
                   {"method", r.method},
                   {"seed", r.seed},
                   {"functional", r.functional},
                   {"best_adp", opt(r.best_adp)},
                   {"best_area", opt(r.best_area)},
                   {"best_delay", opt(r.best_delay)},
                   {"best_reward", r.best_reward},
                   {"first_functional_iteration", opt(r.first_functional_iteration)},
                   {"iterations_run", r.iterations_run},
                   {"best_code", r.best_code_path},
                   {"log", r.log_path},
                   {"injected", r.injected},
                   {"timing", {{"iteration_rate_per_min", r.iteration_rate_per_min}, {"wall_seconds", r.wall_seconds}}}};
  j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
  return j;
}

RunRow row_from_json(const nlohmann::json& j) {
  RunRow r;
  r.task = j.at("task").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.seed = j.value("seed", std::uint64_t{0});
  r.functional = j.at("functional").get<bool>();
  r.best_adp = opt_double(j, "best_adp");
  r.best_area = opt_double(j, "best_area");
  r.best_delay = opt_double(j, "best_delay");
  r.best_reward = j.value("best_reward", 0.0);
  r.first_functional_iteration = opt_size(j, "first_functional_iteration");
  r.iterations_run = j.value("iterations_run", std::size_t{0});
  r.best_code_path = j.value("best_code", std::string{});
  r.log_path = j.value("log", std::string{});
  r.injected = j.value("injected", std::vector<std::string>{});
  if (j.contains("timing")) {
    r.iteration_rate_per_min = j.at("timing").value("iteration_rate_per_min", 0.0);
    r.wall_seconds = j.at("timing").value("wall_seconds", 0.0);
  }
  if (j.contains("error") && !j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  return r;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:g}", *v) : "-"; }
std::string fmt_opt(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "none"; }

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::Mcts:
      return "mcts";
    case Method::Greedy:
      return "greedy";
    case Method::Beam:
      return "beam";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "mcts") return Method::Mcts;
  if (s == "greedy") return Method::Greedy;
  if (s == "beam") return Method::Beam;
  throw ConfigError("unknown method '" + s + "' (expected mcts, greedy or beam)");
}

const std::string& TaskSpec::name() const { return toy ? toy->name : external->name; }

ModuleKey TaskSpec::key() const {
  if (toy) return toy->key();
  return {external->kind, external->bit_width};
}

void ExperimentConfig::validate() const {
  if (tasks.empty()) throw ConfigError("experiment needs at least one task");
  if (methods.empty()) throw ConfigError("experiment needs at least one method");
  if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
  if (beam_width == 0) throw ConfigError("beam_width must be at least 1");
  if (workers == 0) throw ConfigError("workers must be at least 1");
  std::set<std::string> names;
  for (const auto& t : tasks) {
    if (!names.insert(t.name()).second) throw ConfigError("duplicate task name '" + t.name() + "'");
  }
  search.validate();
  composition.validate();
}

nlohmann::json merge_json(nlohmann::json base, const nlohmann::json& overrides) {
  if (!overrides.is_object()) return base;
  for (const auto& [k, v] : overrides.items()) {
    if (v.is_object() && base.contains(k) && base[k].is_object()) {
      base[k] = merge_json(base[k], v);
    } else {
      base[k] = v;
    }
  }
  return base;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    ExperimentConfig c;
    for (const auto& t : j.at("tasks")) c.tasks.push_back(task_from_json(t, base_dir));
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(method_from_string(m.get<std::string>()));
    }
    if (j.contains("search")) c.search = search_config_from_json(j.at("search"));
    c.beam_width = j.value("beam_width", c.beam_width);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.workers = j.value("workers", c.workers);
    if (j.contains("composition")) {
      const auto& comp = j.at("composition");
      c.composition = composition_policy_from_json(comp);
      if (comp.contains("library_dir")) c.library_dir = resolve(base_dir, comp.at("library_dir").get<std::string>());
      c.compare_without_composition = comp.value("compare_without", c.compare_without_composition);
    }
    if (j.contains("model") && !j.at("model").is_null()) c.model = RemoteModelConfig::from_json(j.at("model"));
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, const nlohmann::json& overrides) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(merge_json(std::move(j), overrides), path.parent_path());
}

const RunRow* RunReport::find(const std::string& task, const std::string& method, std::uint64_t s) const {
  for (const auto& r : rows) {
    if (r.task == task && r.method == method && (r.seed == s || !method.starts_with("mcts"))) return &r;
  }
  return nullptr;
}

std::optional<double> adp_improvement_percent(const RunRow& baseline, const RunRow& mcts) {
  if (!baseline.best_adp || !mcts.best_adp) return std::nullopt;
  return (*baseline.best_adp - *mcts.best_adp) / *baseline.best_adp * 100.0;
}

nlohmann::json to_json(const RunReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) rows.push_back(row_to_json(r));
  nlohmann::json comp = nlohmann::json::array();
  for (const auto& c : report.composition) {
    nlohmann::json e{{"task", c.task},
                     {"seed", c.seed},
                     {"injected", c.injected},
                     {"missing", c.missing},
                     {"with_first_functional", opt(c.with_first_functional)},
                     {"without_first_functional", opt(c.without_first_functional)},
                     {"timing",
                      {{"with_rate_per_min", c.with_rate_per_min}, {"without_rate_per_min", c.without_rate_per_min}}}};
    if (c.with_first_functional && c.without_first_functional) {
      e["iterations_ratio"] =
          static_cast<double>(*c.without_first_functional) / static_cast<double>(*c.with_first_functional);
    } else {
      e["iterations_ratio"] = nullptr;
    }
    comp.push_back(std::move(e));
  }
  nlohmann::json improvements = nlohmann::json::array();
  for (const auto& r : report.rows) {
    if (r.method != "mcts") continue;
    for (const char* base : {"greedy", "beam"}) {
      const auto* b = report.find(r.task, base);
      if (!b) continue;
      const auto pct = adp_improvement_percent(*b, r);
      improvements.push_back({{"task", r.task},
                              {"seed", r.seed},
                              {"baseline", base},
                              {"baseline_adp", opt(b->best_adp)},
                              {"mcts_adp", opt(r.best_adp)},
                              {"improvement_percent", opt(pct)}});
    }
  }
  return {{"run_id", report.run_id},   {"seed", report.seed},          {"config", report.config},
          {"rows", rows},              {"composition", comp},          {"adp_improvements", improvements}};
}

RunReport run_report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.run_id = j.value("run_id", std::string{});
  r.seed = j.value("seed", std::uint64_t{0});
  r.config = j.value("config", nlohmann::json::object());
  for (const auto& row : j.at("rows")) r.rows.push_back(row_from_json(row));
  for (const auto& c : j.value("composition", nlohmann::json::array())) {
    CompositionRow row;
    row.task = c.at("task").get<std::string>();
    row.seed = c.value("seed", std::uint64_t{0});
    row.injected = c.value("injected", std::vector<std::string>{});
    row.missing = c.value("missing", std::vector<std::string>{});
    row.with_first_functional = opt_size(c, "with_first_functional");
    row.without_first_functional = opt_size(c, "without_first_functional");
    if (c.contains("timing")) {
      row.with_rate_per_min = c.at("timing").value("with_rate_per_min", 0.0);
      row.without_rate_per_min = c.at("timing").value("without_rate_per_min", 0.0);
    }
    r.composition.push_back(std::move(row));
  }
  return r;
}

nlohmann::json strip_timing(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [k, v] : j.items()) v = strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

std::string render_tables(const RunReport& report) {
  std::vector<std::string> tasks;
  std::vector<std::string> columns;
  std::map<std::pair<std::string, std::string>, const RunRow*> cell;
  std::set<std::uint64_t> seeds;
  for (const auto& r : report.rows) seeds.insert(r.seed);
  for (const auto& r : report.rows) {
    const auto label =
        r.method.starts_with("mcts") && seeds.size() > 1 ? r.method + " s" + std::to_string(r.seed) : r.method;
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
    if (std::find(columns.begin(), columns.end(), label) == columns.end()) columns.push_back(label);
    cell[{r.task, label}] = &r;
  }

  std::string out;
  auto table = [&](const std::string& title, auto&& value) {
    out += "## " + title + "\n\n| task |";
    for (const auto& c : columns) out += " " + c + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& t : tasks) {
      out += "| " + t + " |";
      for (const auto& c : columns) {
        const auto it = cell.find({t, c});
        out += " " + (it == cell.end() ? std::string("") : value(*it->second)) + " |";
      }
      out += "\n";
    }
    out += "\n";
  };
  table("Functional success", [](const RunRow& r) -> std::string {
    if (r.error) return "error";
    return r.functional ? "yes" : "no";
  });
  table("Best ADP (area x delay)", [](const RunRow& r) {
    return r.best_adp ? fmt::format("{:g} ({:g} x {:g})", *r.best_adp, *r.best_area, *r.best_delay) : std::string("-");
  });
  table("Iterations to first functional", [](const RunRow& r) { return fmt_opt(r.first_functional_iteration); });
  table("Iteration rate (per minute)", [](const RunRow& r) { return fmt::format("{:.0f}", r.iteration_rate_per_min); });

  out += "## ADP improvement of MCTS\n\n| task | seed | vs greedy | vs beam |\n|---|---|---|---|\n";
  for (const auto& r : report.rows) {
    if (r.method != "mcts") continue;
    auto pct = [&](const char* base) {
      const auto* b = report.find(r.task, base);
      const auto p = b ? adp_improvement_percent(*b, r) : std::nullopt;
      return p ? fmt::format("{:.1f}%", *p) : std::string("-");
    };
    out += fmt::format("| {} | {} | {} | {} |\n", r.task, r.seed, pct("greedy"), pct("beam"));
  }
  out += "\n";

  if (!report.composition.empty()) {
    out += "## Composition\n\n| task | seed | injected | first functional (with) | first functional (without) | "
           "ratio | rate/min (with) | rate/min (without) |\n|---|---|---|---|---|---|---|---|\n";
    for (const auto& c : report.composition) {
      std::string injected;
      for (const auto& i : c.injected) injected += (injected.empty() ? "" : ", ") + i;
      std::string ratio = "-";
      if (c.with_first_functional && c.without_first_functional) {
        ratio = fmt::format("{:.2f}", static_cast<double>(*c.without_first_functional) /
                                          static_cast<double>(*c.with_first_functional));
      }
      out += fmt::format("| {} | {} | {} | {} | {} | {} | {:.0f} | {:.0f} |\n", c.task, c.seed,
                         injected.empty() ? "-" : injected, fmt_opt(c.with_first_functional),
                         fmt_opt(c.without_first_functional), ratio, c.with_rate_per_min, c.without_rate_per_min);
    }
    out += "\n";
  }
  return out;
}

std::string render_curves_csv(const RunReport& report) {
  std::string out = "task,method,seed,iteration,cumulative_functional\n";
  for (const auto& r : report.rows) {
    if (!r.method.starts_with("mcts")) continue;
    const bool any = std::find(r.functional_by_iteration.begin(), r.functional_by_iteration.end(), true) !=
                     r.functional_by_iteration.end();
    if (!any) {
      out += fmt::format("{},{},{},none,0\n", r.task, r.method, r.seed);
      continue;
    }
    std::size_t count = 0;
    for (std::size_t i = 0; i < r.functional_by_iteration.size(); ++i) {
      count += r.functional_by_iteration[i] ? 1 : 0;
      out += fmt::format("{},{},{},{},{}\n", r.task, r.method, r.seed, i + 1, count);
    }
  }
  return out;
}

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  ModuleLibrary library(config.library_path());

  RunReport report;
  report.config = config_summary(config);
  report.run_id = sha256_hex(report.config.dump()).substr(0, 12);
  report.seed = config.seeds.front();
  Runner runner(config, library, report.run_id);

  const auto levels = dependency_levels(config);
  const auto max_level = *std::max_element(levels.begin(), levels.end());
  std::vector<TaskResult> results(config.tasks.size());
  for (std::size_t level = 0; level <= max_level; ++level) {
    std::vector<std::size_t> batch;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] == level) batch.push_back(i);
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t b = next++; b < batch.size(); b = next++) {
        const auto i = batch[b];
        spdlog::info("task {} started", config.tasks[i].name());
        results[i] = runner.run_task(config.tasks[i]);
      }
    };
    const auto n = std::min(config.workers, batch.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }
  for (auto& r : results) {
    for (auto& row : r.rows) report.rows.push_back(std::move(row));
    for (auto& c : r.composition) report.composition.push_back(std::move(c));
  }

  write_file(config.output_dir / "report.json", to_json(report).dump(2) + "\n");
  write_file(config.output_dir / "tables.md", render_tables(report));
  write_file(config.output_dir / "curves.csv", render_curves_csv(report));
  return report;
}

std::vector<SweepRow> sweep_baseline_reward(const ExperimentConfig& config, const std::vector<double>& alpha_b_values) {
  config.validate();
  if (alpha_b_values.size() < 2) throw ConfigError("the sweep needs at least two alpha_b values");
  const auto& task = config.tasks.front();
  const auto rt = make_runtime(config, task);
  const auto prompt = make_prompt(rt.base_prompt, rt.model->vocabulary());
  std::vector<SweepRow> rows;
  for (double a : alpha_b_values) {
    auto cfg = config.search;
    cfg.reward.alpha_b = a;
    cfg.seed = config.seeds.front();
    cfg.t_max = rt.t_max;
    EvaluationCache cache;
    const auto result = search(prompt, *rt.model, *rt.evaluator, cache, cfg);
    SweepRow row;
    row.alpha_b = a;
    std::size_t functional = 0;
    for (const auto& r : result.per_iteration_log) functional += r.outcome.functional ? 1 : 0;
    row.iterations = result.iterations_run;
    row.functional_fraction = row.iterations ? static_cast<double>(functional) / static_cast<double>(row.iterations) : 0.0;
    row.distinct_terminals = distinct_terminals(result.per_iteration_log);
    row.max_identical_adp_streak = max_identical_adp_streak(result.per_iteration_log);
    row.best_adp = result.best_outcome.functional ? result.best_outcome.adp() : std::nullopt;
    row.best_reward = result.best_reward;
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json to_json(const std::vector<SweepRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"alpha_b", r.alpha_b},
                   {"functional_fraction", r.functional_fraction},
                   {"distinct_terminals", r.distinct_terminals},
                   {"max_identical_adp_streak", r.max_identical_adp_streak},
                   {"best_adp", opt(r.best_adp)},
                   {"best_reward", r.best_reward},
                   {"iterations", r.iterations}});
  }
  return out;
}

std::string render_sweep_table(const std::vector<SweepRow>& rows) {
  std::string out =
      "| alpha_b | functional fraction | distinct terminals | max identical-ADP streak | best ADP |\n"
      "|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += fmt::format("| {:g} | {:.3f} | {} | {} | {} |\n", r.alpha_b, r.functional_fraction, r.distinct_terminals,
                       r.max_identical_adp_streak, fmt_opt(r.best_adp));
  }
  return out;
}

void rerender_reports(const std::filesystem::path& dir) {
  auto report = run_report_from_json(nlohmann::json::parse(read_file(dir / "report.json")));
  for (auto& row : report.rows) {
    if (row.log_path.empty() || !std::filesystem::exists(dir / row.log_path)) continue;
    std::istringstream in(read_file(dir / row.log_path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      row.functional_by_iteration.push_back(nlohmann::json::parse(line).at("functional").get<bool>());
    }
  }
  write_file(dir / "tables.md", render_tables(report));
  write_file(dir / "curves.csv", render_curves_csv(report));
}

}  // namespace rtlmcts
