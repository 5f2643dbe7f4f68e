#include "cli.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "chaintrust/benchmark.hpp"
#include "chaintrust/evaluators.hpp"
#include "chaintrust/gateway.hpp"
#include "chaintrust/io.hpp"
#include "chaintrust/pipeline.hpp"

#ifndef CHAINTRUST_DEFAULT_DATA_DIR
#define CHAINTRUST_DEFAULT_DATA_DIR "data"
#endif

namespace chaintrust::cli {

namespace fs = std::filesystem;

namespace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string fleet;
  std::string task_text;
  std::string service;
  std::string owner = "a1";
  std::string evaluator = "rule";
  std::string transcript;
  std::string record;
  std::string data_dir = CHAINTRUST_DEFAULT_DATA_DIR;
  std::string stages;
  std::string out_dir = ".";

  std::optional<double> fast_comm_min;
  std::optional<std::string> secure_comm_min;
  std::optional<double> fast_compute_min;
  bool gpu_not_fast = false;
  std::optional<std::string> secure_compute_min;
  std::optional<std::string> honest_min;

  std::string endpoint = ModelConfig{}.endpoint;
  std::vector<std::string> models;
  double temperature = 0.0;
  int max_tokens = ModelConfig{}.max_tokens;
  int timeout_s = 60;
  int max_attempts = ModelConfig{}.retry.max_attempts;
  std::string api_key_env = ModelConfig{}.api_key_env;

  // bench
  std::size_t tasks = 200;
  std::uint64_t seed = 7;
  std::string modes = "chain_of_trust";
  double noise = -1.0;
  unsigned threads = 1;
  std::vector<std::string> vocabulary;
  double flag_probability = 1.0;
};

void add_fleet_and_task(CLI::App& cmd, Options& o) {
  cmd.add_option("--fleet", o.fleet, "Fleet document (JSON)")->required();
  cmd.add_option("--task", o.task_text, "Task request text (defaults to the 3D mapping example)");
  cmd.add_option("--service", o.service, "Override the service parsed from the task text");
  cmd.add_option("--owner", o.owner, "Task owner id")->capture_default_str();
}

void add_evaluator(CLI::App& cmd, Options& o) {
  cmd.add_option("--evaluator", o.evaluator, "rule | llm | scripted")
      ->check(CLI::IsMember({"rule", "llm", "scripted"}))
      ->capture_default_str();
  cmd.add_option("--transcript", o.transcript, "Transcript to replay (scripted evaluator)");
  cmd.add_option("--record", o.record, "Record live exchanges to this transcript (llm evaluator)");
  cmd.add_option("--data-dir", o.data_dir, "Directory holding exemplars/ and baselines.json")->capture_default_str();
  cmd.add_option("--fast-comm-min", o.fast_comm_min, "Minimum MB/s counted as fast transmission");
  cmd.add_option("--secure-comm-min", o.secure_comm_min, "Minimum link security level");
  cmd.add_option("--fast-compute-min", o.fast_compute_min, "Minimum CPU GHz counted as fast execution");
  cmd.add_flag("--gpu-not-fast", o.gpu_not_fast, "Do not count a GPU as fast execution");
  cmd.add_option("--secure-compute-min", o.secure_compute_min, "Minimum computing security level");
  cmd.add_option("--honest-min", o.honest_min, "Minimum result delivery loyalty");
  cmd.add_option("--stages", o.stages, "Comma-separated stage order");
  cmd.add_option("--endpoint", o.endpoint, "Chat-completions endpoint URL")->capture_default_str();
  cmd.add_option("--model", o.models, "Model name; bench accepts several");
  cmd.add_option("--temperature", o.temperature, "Sampling temperature")->capture_default_str();
  cmd.add_option("--max-tokens", o.max_tokens, "Completion token limit")->capture_default_str();
  cmd.add_option("--timeout", o.timeout_s, "Request timeout in seconds")->capture_default_str();
  cmd.add_option("--max-attempts", o.max_attempts, "Attempts per request")->capture_default_str();
  cmd.add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key")->capture_default_str();
  cmd.add_option("--out-dir", o.out_dir, "Directory for output files")->capture_default_str();
}

Registry load_registry(const Options& o) {
  try {
    return registry_from_fleet(load_fleet(o.fleet));
  } catch (const FleetParseError& e) {
    throw ConfigError(e.what());
  }
}

DeviceId owner_of(const Options& o) {
  try {
    return DeviceId::parse(o.owner);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Task make_task(const Options& o) {
  const auto owner = owner_of(o);
  if (o.task_text.empty() && o.service.empty()) {
    auto t = reference_task();
    t.owner = owner;
    return t;
  }
  Task t;
  if (o.task_text.empty()) {
    t.owner = owner;
    t.required_service = o.service;
    t.text = render_task_text(t);
    return t;
  }
  try {
    t = parse_task_text(o.task_text, owner);
  } catch (const std::invalid_argument& e) {
    if (o.service.empty()) throw ConfigError(fmt::format("{} (pass --service)", e.what()));
    t.owner = owner;
    t.text = o.task_text;
  }
  if (!o.service.empty()) t.required_service = o.service;
  return t;
}

RulePolicy make_policy(const Options& o) {
  RulePolicy p;
  try {
    if (o.fast_comm_min) p.fast_comm_min_rate_mb_s = *o.fast_comm_min;
    if (o.secure_comm_min) p.secure_comm_min = parse_security(*o.secure_comm_min);
    if (o.fast_compute_min) p.fast_compute_min_ghz = *o.fast_compute_min;
    if (o.gpu_not_fast) p.gpu_counts_as_fast = false;
    if (o.secure_compute_min) p.secure_compute_min = parse_security(*o.secure_compute_min);
    if (o.honest_min) p.honest_delivery_min = parse_loyalty(*o.honest_min);
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

ChainSpec make_chain(const Options& o) {
  ChainSpec spec;
  if (o.stages.empty()) return spec;
  spec.stages.clear();
  std::stringstream in(o.stages);
  try {
    for (std::string item; std::getline(in, item, ',');) {
      if (!item.empty()) spec.stages.push_back(parse_stage(item));
    }
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

ModelConfig model_config(const Options& o, const std::string& model) {
  ModelConfig c;
  c.endpoint = o.endpoint;
  c.model = model;
  c.temperature = o.temperature;
  c.max_tokens = o.max_tokens;
  c.timeout = std::chrono::seconds(o.timeout_s);
  c.retry.max_attempts = o.max_attempts;
  c.api_key_env = o.api_key_env;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::shared_ptr<Evaluator> make_evaluator(const Options& o, const RulePolicy& policy, const std::string& model) {
  if (o.evaluator == "rule") return std::make_shared<RuleEvaluator>(policy);

  const fs::path data(o.data_dir);
  ExemplarSet exemplars;
  BaselinePrompts baselines;
  try {
    exemplars = ExemplarSet::load(data / "exemplars");
    if (fs::exists(data / "baselines.json")) baselines = BaselinePrompts::load(data / "baselines.json");
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  std::shared_ptr<Transport> transport;
  std::string label;
  if (o.evaluator == "scripted") {
    if (o.transcript.empty()) throw ConfigError("the scripted evaluator needs --transcript");
    try {
      transport = record_replay(TranscriptMode::replay, o.transcript);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    label = "scripted";
  } else {
    try {
      transport = make_model_transport(model_config(o, model));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!o.record.empty()) transport = record_replay(TranscriptMode::record, o.record, transport);
    label = model;
  }
  return std::make_shared<PromptEvaluator>(transport, std::move(exemplars), std::move(baselines), label);
}

std::string file_safe(std::string s) {
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
  }
  return s;
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  out << doc.dump(2) << '\n';
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  auto registry = load_registry(o);
  const auto task = make_task(o);
  const auto policy = make_policy(o);
  const auto chain = make_chain(o);
  const auto model = o.models.empty() ? ModelConfig{}.model : o.models.front();
  const auto evaluator = make_evaluator(o, policy, model);

  const auto trace = run_chain(task, registry, *evaluator, chain);
  const auto path = fs::path(o.out_dir) / "trace.json";
  write_json(path, trace_to_json(trace));

  err << fmt::format("status: {}\ntrace: {}\n", trace.status.str(), path.string());
  if (trace.status.kind == ChainStatusKind::evaluator_failed) {
    err << fmt::format("evaluator failed at stage {}: {}\n", to_string(*trace.status.stage), trace.status.message);
    return kExitEvaluation;
  }
  out << render_set(trace.final_set) << '\n';
  return kExitOk;
}

std::vector<BenchmarkMode> parse_modes(const std::string& text) {
  if (text == "all") return {kAllModes.begin(), kAllModes.end()};
  std::vector<BenchmarkMode> modes;
  std::stringstream in(text);
  try {
    for (std::string item; std::getline(in, item, ',');) {
      if (!item.empty()) modes.push_back(parse_mode(item));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (modes.empty()) throw ConfigError("no benchmark modes given");
  return modes;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.tasks == 0) throw ConfigError("--tasks must be >= 1");
  const auto registry = load_registry(o);
  const auto policy = make_policy(o);
  const auto chain = make_chain(o);
  const auto modes = parse_modes(o.modes);

  TaskGenerator gen;
  gen.seed = o.seed;
  gen.owner = owner_of(o);
  gen.services = o.vocabulary.empty() ? default_service_vocabulary() : o.vocabulary;
  const double q = o.flag_probability;
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("--flag-probability must be in [0, 1]");
  gen.flags = {q, q, q, q, q};
  const auto tasks = generate_tasks(gen, o.tasks);

  std::vector<std::shared_ptr<Evaluator>> evaluators;
  if (o.evaluator == "rule" && o.noise >= 0.0) {
    if (o.noise > 1.0) throw ConfigError("--noise must be in [0, 1]");
    evaluators.push_back(std::make_shared<NoisyRuleEvaluator>(
        policy, o.noise, o.seed, [registry, policy](const Task& t) { return ground_truth(t, registry, policy); }));
  } else if (o.evaluator == "llm" && o.models.size() > 1) {
    for (const auto& m : o.models) evaluators.push_back(make_evaluator(o, policy, m));
  } else {
    evaluators.push_back(make_evaluator(o, policy, o.models.empty() ? ModelConfig{}.model : o.models.front()));
  }

  BenchmarkOptions options;
  options.chain = chain;
  options.threads = o.threads;
  std::vector<BenchmarkReport> reports;
  for (const auto& evaluator : evaluators) {
    for (auto mode : modes) {
      auto report = run_benchmark(tasks, registry, *evaluator, policy, mode, options);
      write_json(fs::path(o.out_dir) / fmt::format("report_{}_{}.json", file_safe(report.evaluator), to_string(mode)),
                 report_to_json(report));
      if (report.failures > 0) err << fmt::format("{} {}: {} task(s) failed\n", report.evaluator, to_string(mode), report.failures);
      reports.push_back(std::move(report));
    }
  }
  const auto table = render_table(reports);
  write_json(fs::path(o.out_dir) / "comparison.json", comparison_to_json(reports));
  std::ofstream(fs::path(o.out_dir) / "comparison.txt") << table;
  out << table;
  return kExitOk;
}

int cmd_fleet_validate(const std::string& path, bool export_json, std::ostream& out, std::ostream& err) {
  std::vector<Device> devices;
  try {
    devices = load_fleet(path);
  } catch (const FleetParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }
  const auto problems = validate_fleet(devices);
  for (const auto& p : problems) err << "violation: " << p << '\n';
  if (!problems.empty()) return kExitConfig;
  out << fmt::format("ok: {} devices\n", devices.size());
  if (export_json) out << fleet_to_json(devices).dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Progressive, stage-by-stage trust evaluation of collaborator devices"};
  app.require_subcommand(1);
  Options o;

  auto* run_cmd = app.add_subcommand("run", "Evaluate one task and write its trace");
  add_fleet_and_task(*run_cmd, o);
  add_evaluator(*run_cmd, o);

  Options replay_opts;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a recorded chain from its transcript");
  add_fleet_and_task(*replay_cmd, replay_opts);
  replay_cmd->add_option("--transcript", replay_opts.transcript, "Transcript file")->required();
  replay_cmd->add_option("--data-dir", replay_opts.data_dir, "Directory holding exemplars/")->capture_default_str();
  replay_cmd->add_option("--stages", replay_opts.stages, "Comma-separated stage order");
  replay_cmd->add_option("--out-dir", replay_opts.out_dir, "Directory for the trace")->capture_default_str();

  auto* bench_cmd = app.add_subcommand("bench", "Score an evaluator on a generated task corpus");
  add_fleet_and_task(*bench_cmd, o);
  add_evaluator(*bench_cmd, o);
  bench_cmd->add_option("-n,--tasks", o.tasks, "Number of tasks")->capture_default_str();
  bench_cmd->add_option("--seed", o.seed, "Corpus seed")->capture_default_str();
  bench_cmd->add_option("--modes", o.modes, "Comma-separated modes or 'all'")->capture_default_str();
  bench_cmd->add_option("--noise", o.noise, "Stage corruption probability for the rule evaluator");
  bench_cmd->add_option("--threads", o.threads, "Worker threads")->capture_default_str();
  bench_cmd->add_option("--services", o.vocabulary, "Service vocabulary for generated tasks");
  bench_cmd->add_option("--flag-probability", o.flag_probability, "Probability each request flag is set")
      ->capture_default_str();

  std::string validate_path;
  bool export_json = false;
  auto* validate_cmd = app.add_subcommand("fleet-validate", "Parse and validate a fleet document");
  validate_cmd->add_option("path", validate_path, "Fleet document")->required();
  validate_cmd->add_flag("--export", export_json, "Print the normalized fleet document");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(o, out, err);
    if (*replay_cmd) {
      replay_opts.evaluator = "scripted";
      return cmd_run(replay_opts, out, err);
    }
    if (*bench_cmd) return cmd_bench(o, out, err);
    if (*validate_cmd) return cmd_fleet_validate(validate_path, export_json, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitEvaluation;
  }
  return kExitConfig;
}

}  // namespace chaintrust::cli
