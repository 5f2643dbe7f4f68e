#include "chaintrust/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cctype>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace chaintrust {

Task reference_task() {
  Task t;
  t.owner = DeviceId{1};
  t.text =
      "I have several photos of an environment and want to quickly and securely accomplish a 3D "
      "mapping task based on these photos, which devices can be trusted to perform this task?";
  t.required_service = "3D mapping";
  return t;
}

std::vector<std::string> default_service_vocabulary() {
  return {"3D mapping", "AI model training", "video capture", "edge computing", "image classification",
          "edge caching"};
}

std::vector<Task> generate_tasks(const TaskGenerator& generator, std::size_t n) {
  if (n == 0) throw std::invalid_argument("task count must be >= 1");
  if (generator.services.empty()) throw std::invalid_argument("service vocabulary is empty");
  for (const auto& s : generator.services) {
    if (normalize_service(s).empty()) throw std::invalid_argument("service vocabulary has a blank entry");
  }

  std::mt19937_64 rng(generator.seed);
  std::uniform_int_distribution<std::size_t> pick(0, generator.services.size() - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const auto& f = generator.flags;

  std::vector<Task> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Task t;
    t.owner = generator.owner;
    t.required_service = generator.services[pick(rng)];
    t.wants_fast_comm = coin(rng) < f.fast_comm;
    t.wants_secure_comm = coin(rng) < f.secure_comm;
    t.wants_fast_compute = coin(rng) < f.fast_compute;
    t.wants_secure_compute = coin(rng) < f.secure_compute;
    t.wants_honest_delivery = coin(rng) < f.honest_delivery;
    t.text = render_task_text(t);
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

SecurityLevel random_level(std::mt19937_64& rng) {
  return static_cast<SecurityLevel>(std::uniform_int_distribution<int>(0, 2)(rng));
}

double rounded(double v, double step) { return std::round(v / step) * step; }

}  // namespace

std::vector<Device> random_fleet(std::mt19937_64& rng, const RandomFleetOptions& options) {
  if (options.services.empty()) throw std::invalid_argument("service vocabulary is empty");
  std::uniform_int_distribution<std::size_t> count(options.min_devices, options.max_devices);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = count(rng);

  std::vector<Device> fleet;
  for (std::size_t i = 1; i <= n; ++i) {
    Device d;
    d.id = DeviceId{static_cast<std::uint32_t>(i)};
    d.device_class = static_cast<DeviceClass>(std::uniform_int_distribution<int>(0, 4)(rng));
    for (const auto& s : options.services) {
      if (unit(rng) < 0.45) d.services.push_back(s);
    }
    if (d.services.empty()) {
      d.services.push_back(options.services[std::uniform_int_distribution<std::size_t>(
          0, options.services.size() - 1)(rng)]);
    }
    d.comm.rate_mb_per_s = rounded(unit(rng) * 60.0, 0.5);
    d.comm.security = random_level(rng);
    d.compute.cpu_clock_ghz = rounded(0.1 + unit(rng) * 4.4, 0.01);
    d.compute.has_gpu = unit(rng) < 0.25;
    d.compute.security = random_level(rng);
    d.delivery.loyalty = static_cast<Loyalty>(std::uniform_int_distribution<int>(0, 2)(rng));
    fleet.push_back(std::move(d));
  }
  return fleet;
}

Task random_task(std::mt19937_64& rng, const std::vector<std::string>& services, DeviceId owner) {
  if (services.empty()) throw std::invalid_argument("service vocabulary is empty");
  std::bernoulli_distribution coin(0.5);
  Task t;
  t.owner = owner;
  t.required_service = services[std::uniform_int_distribution<std::size_t>(0, services.size() - 1)(rng)];
  t.wants_fast_comm = coin(rng);
  t.wants_secure_comm = coin(rng);
  t.wants_fast_compute = coin(rng);
  t.wants_secure_compute = coin(rng);
  t.wants_honest_delivery = coin(rng);
  t.text = render_task_text(t);
  return t;
}

RulePolicy random_policy(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RulePolicy p;
  p.fast_comm_min_rate_mb_s = rounded(unit(rng) * 50.0, 0.5);
  p.secure_comm_min = random_level(rng);
  p.fast_compute_min_ghz = rounded(0.1 + unit(rng) * 4.0, 0.01);
  p.gpu_counts_as_fast = unit(rng) < 0.5;
  p.secure_compute_min = random_level(rng);
  p.honest_delivery_min = static_cast<Loyalty>(std::uniform_int_distribution<int>(0, 2)(rng));
  return p;
}

Registry registry_of(const std::vector<Device>& devices) {
  Registry r;
  for (const auto& d : devices) r.register_device(d);
  return r;
}

namespace {

// Word-wise lowercase comparison, written separately from the service
// matcher the stages use.
std::vector<std::string> words_of(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) {
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(w);
  }
  return out;
}

}  // namespace

DeviceSet ground_truth(const Task& task, const Registry& registry, const RulePolicy& policy) {
  const auto wanted = words_of(task.required_service);
  DeviceSet out;
  for (const auto& [id, d] : registry.devices()) {
    if (id == task.owner) continue;

    bool offers = false;
    for (const auto& s : d.services) offers = offers || (!wanted.empty() && words_of(s) == wanted);

    const bool comm_fast = d.comm.rate_mb_per_s >= policy.fast_comm_min_rate_mb_s;
    const bool comm_secure = d.comm.security >= policy.secure_comm_min;
    const bool cpu_fast = d.compute.cpu_clock_ghz >= policy.fast_compute_min_ghz ||
                          (policy.gpu_counts_as_fast && d.compute.has_gpu);
    const bool cpu_secure = d.compute.security >= policy.secure_compute_min;
    const bool loyal = d.delivery.loyalty >= policy.honest_delivery_min;

    const bool trusted = offers && (comm_fast || !task.wants_fast_comm) &&
                         (comm_secure || !task.wants_secure_comm) && (cpu_fast || !task.wants_fast_compute) &&
                         (cpu_secure || !task.wants_secure_compute) && (loyal || !task.wants_honest_delivery);
    if (trusted) out.insert(id);
  }
  return out;
}

double jaccard(const DeviceSet& a, const DeviceSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& id : a) common += b.contains(id) ? 1 : 0;
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::string_view to_string(BenchmarkMode mode) {
  switch (mode) {
    case BenchmarkMode::chain_of_trust: return "chain_of_trust";
    case BenchmarkMode::chain_of_thought_single_prompt: return "chain_of_thought_single_prompt";
    case BenchmarkMode::standard_single_prompt: return "standard_single_prompt";
  }
  return "?";
}

BenchmarkMode parse_mode(std::string_view text) {
  for (auto m : kAllModes) {
    if (to_string(m) == text) return m;
  }
  throw std::invalid_argument(fmt::format("unknown benchmark mode '{}'", text));
}

namespace {

TaskResult score_task(const Task& task, std::size_t index, const Registry& registry, const Evaluator& evaluator,
                      const RulePolicy& policy, BenchmarkMode mode, const ChainSpec& chain) {
  TaskResult r;
  r.task = task;
  r.truth = ground_truth(task, registry, policy);
  Registry local = registry;

  if (mode == BenchmarkMode::chain_of_trust) {
    const auto trace = run_chain(task, local, evaluator, chain, index);
    r.predicted = trace.final_set;
    r.failed = trace.status.kind == ChainStatusKind::evaluator_failed;
    if (r.failed) r.failure = trace.status.message;
    r.status = trace.status.str();
    r.stage_invocations = trace.records.size();
    r.collected_records = trace.collected_records();
  } else {
    auto candidates = local.ids();
    candidates.erase(task.owner);
    AccumulatedView view;
    for (auto stage : kEvaluationStages) merge_snapshot(view, local.collect(stage, candidates));
    r.collected_records = local.collected_records();
    r.status = "complete";
    if (!candidates.empty()) {
      const auto style = mode == BenchmarkMode::chain_of_thought_single_prompt ? SinglePromptStyle::chain_of_thought
                                                                              : SinglePromptStyle::standard;
      r.stage_invocations = 1;
      try {
        const auto j = evaluator.select(style, task, view, index);
        for (const auto& id : j.survivors) {
          if (candidates.contains(id)) r.predicted.insert(id);
        }
      } catch (const EvaluatorFailure& e) {
        r.failed = true;
        r.failure = e.what();
        r.status = "evaluator_failed";
      }
    }
  }
  r.exact_match = !r.failed && r.predicted == r.truth;
  r.jaccard = r.failed ? 0.0 : jaccard(r.predicted, r.truth);
  return r;
}

}  // namespace

BenchmarkReport run_benchmark(const std::vector<Task>& tasks, const Registry& registry, const Evaluator& evaluator,
                              const RulePolicy& policy, BenchmarkMode mode, const BenchmarkOptions& options) {
  if (tasks.empty()) throw std::invalid_argument("benchmark needs at least one task");
  options.chain.validate();
  policy.validate();
  const auto started = std::chrono::steady_clock::now();

  BenchmarkReport report;
  report.evaluator = evaluator.label();
  report.mode = mode;
  report.tasks.resize(tasks.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        report.tasks[i] = score_task(tasks[i], i, registry, evaluator, policy, mode, options.chain);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const auto threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(tasks.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  std::size_t matches = 0;
  double jaccard_sum = 0.0;
  for (const auto& r : report.tasks) {
    matches += r.exact_match ? 1 : 0;
    jaccard_sum += r.jaccard;
    report.failures += r.failed ? 1 : 0;
    report.stage_invocations += r.stage_invocations;
    report.collected_records += r.collected_records;
  }
  report.accuracy = static_cast<double>(matches) / static_cast<double>(tasks.size());
  report.mean_jaccard = jaccard_sum / static_cast<double>(tasks.size());
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::string render_table(const std::vector<BenchmarkReport>& reports) {
  std::string out = fmt::format("{:<16} {:<32} {:>6} {:>9} {:>13} {:>9} {:>12} {:>18}\n", "evaluator", "mode",
                                "tasks", "accuracy", "mean_jaccard", "failures", "stage_calls",
                                "collected_records");
  for (const auto& r : reports) {
    out += fmt::format("{:<16} {:<32} {:>6} {:>9.3f} {:>13.3f} {:>9} {:>12} {:>18}\n", r.evaluator,
                       to_string(r.mode), r.tasks.size(), r.accuracy, r.mean_jaccard, r.failures,
                       r.stage_invocations, r.collected_records);
  }
  return out;
}

NoisyRuleEvaluator::NoisyRuleEvaluator(RulePolicy policy, double p, std::uint64_t seed, TruthFn truth)
    : inner_(policy), p_(p), seed_(seed), truth_(std::move(truth)) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise probability must be in [0, 1]");
  if (!truth_) throw std::invalid_argument("noisy evaluator needs a truth function");
}

std::string NoisyRuleEvaluator::label() const { return fmt::format("rule+noise(p={})", p_); }

Judgement NoisyRuleEvaluator::judge(const StageContext& ctx) const {
  auto j = inner_.judge(ctx);
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(ctx.nonce), static_cast<std::uint32_t>(ctx.nonce >> 32),
                    static_cast<std::uint32_t>(ctx.stage)};
  std::mt19937_64 rng(seq);
  const bool corrupt = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p_;

  std::vector<DeviceId> carried;
  const auto truth = truth_(ctx.task);
  std::set_intersection(j.survivors.begin(), j.survivors.end(), truth.begin(), truth.end(),
                        std::back_inserter(carried));
  if (corrupt && !carried.empty()) {
    const auto victim = carried[std::uniform_int_distribution<std::size_t>(0, carried.size() - 1)(rng)];
    j.survivors.erase(victim);
    j.prompt += fmt::format(" [noise removed {}]", victim.str());
    j.raw_output = render_stage_answer(ctx.stage, ctx.question, j.survivors);
  }
  return j;
}

}  // namespace chaintrust
