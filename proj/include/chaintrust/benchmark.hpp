#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "chaintrust/evaluators.hpp"
#include "chaintrust/pipeline.hpp"
#include "chaintrust/registry.hpp"

namespace chaintrust {

/// The worked 3D-mapping request from owner a1.
Task reference_task();

/// Probability that each request flag is set.
struct FlagDistribution {
  double fast_comm = 1.0;
  double secure_comm = 1.0;
  double fast_compute = 1.0;
  double secure_compute = 1.0;
  double honest_delivery = 1.0;
};

struct TaskGenerator {
  std::uint64_t seed = 42;
  std::vector<std::string> services;
  FlagDistribution flags;
  DeviceId owner{1};
};

/// Same generator and n always give the same corpus. Throws
/// std::invalid_argument on n == 0 or an empty vocabulary.
std::vector<Task> generate_tasks(const TaskGenerator& generator, std::size_t n);

/// Default service vocabulary: the services the reference fleet offers.
std::vector<std::string> default_service_vocabulary();

// -- random instances for property checks ---------------------------------

struct RandomFleetOptions {
  std::size_t min_devices = 1;
  std::size_t max_devices = 24;
  std::vector<std::string> services = default_service_vocabulary();
};

/// Devices a1..aN with random attributes; a1 is the intended owner.
std::vector<Device> random_fleet(std::mt19937_64& rng, const RandomFleetOptions& options = {});
Task random_task(std::mt19937_64& rng, const std::vector<std::string>& services, DeviceId owner = DeviceId{1});
RulePolicy random_policy(std::mt19937_64& rng);
Registry registry_of(const std::vector<Device>& devices);

// -- scoring ----------------------------------------------------------------

/// Single pass over every non-owner device with the conjunction of all
/// requested stage predicates. Result delivery counts only when the task
/// asks for honest delivery.
DeviceSet ground_truth(const Task& task, const Registry& registry, const RulePolicy& policy);

/// |a ∩ b| / |a ∪ b|, with jaccard(∅, ∅) = 1.
double jaccard(const DeviceSet& a, const DeviceSet& b);

enum class BenchmarkMode { chain_of_trust, chain_of_thought_single_prompt, standard_single_prompt };

inline constexpr std::array<BenchmarkMode, 3> kAllModes = {
    BenchmarkMode::chain_of_trust, BenchmarkMode::chain_of_thought_single_prompt,
    BenchmarkMode::standard_single_prompt};

std::string_view to_string(BenchmarkMode mode);
BenchmarkMode parse_mode(std::string_view text);

struct TaskResult {
  Task task;
  DeviceSet predicted;
  DeviceSet truth;
  bool exact_match = false;
  double jaccard = 0.0;
  bool failed = false;
  std::string failure;
  std::string status;
  std::size_t stage_invocations = 0;
  std::size_t collected_records = 0;
};

struct BenchmarkReport {
  std::string evaluator;
  BenchmarkMode mode = BenchmarkMode::chain_of_trust;
  std::vector<TaskResult> tasks;
  double accuracy = 0.0;
  double mean_jaccard = 0.0;
  std::size_t failures = 0;
  std::size_t stage_invocations = 0;
  std::size_t collected_records = 0;
  double elapsed_seconds = 0.0;
};

struct BenchmarkOptions {
  ChainSpec chain;
  unsigned threads = 1;
};

/// Scores `evaluator` on every task against ground_truth. Each task runs on
/// its own copy of the registry, so tasks are independent and the report is
/// identical for any thread count.
BenchmarkReport run_benchmark(const std::vector<Task>& tasks, const Registry& registry, const Evaluator& evaluator,
                              const RulePolicy& policy, BenchmarkMode mode, const BenchmarkOptions& options = {});

/// Fixed-width accuracy table, one row per report.
std::string render_table(const std::vector<BenchmarkReport>& reports);

/// Rule evaluation with injected mistakes: at each evaluation stage, with
/// probability p, one device the true chain would keep to the end is
/// removed from the survivors. Randomness is keyed on (seed, nonce, stage).
class NoisyRuleEvaluator : public Evaluator {
 public:
  using TruthFn = std::function<DeviceSet(const Task&)>;

  NoisyRuleEvaluator(RulePolicy policy, double p, std::uint64_t seed, TruthFn truth);

  std::string label() const override;
  Decomposition decompose(const Task& task) const override { return inner_.decompose(task); }
  Judgement judge(const StageContext& ctx) const override;
  Judgement select(SinglePromptStyle style, const Task& task, const AccumulatedView& devices,
                   std::uint64_t nonce) const override {
    return inner_.select(style, task, devices, nonce);
  }

 private:
  RuleEvaluator inner_;
  double p_;
  std::uint64_t seed_;
  TruthFn truth_;
};

}  // namespace chaintrust
