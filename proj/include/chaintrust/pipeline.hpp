#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chaintrust/evaluators.hpp"
#include "chaintrust/registry.hpp"

namespace chaintrust {

/// Which stages run and in what order. Evaluation stages the task's
/// decomposition does not ask for are skipped.
struct ChainSpec {
  std::vector<StageId> stages = {StageId::decomposition, StageId::service_availability,
                                 StageId::communication, StageId::computing, StageId::result_delivery};
  /// Extra in-run re-executions of a stage on its own survivors with a fresh
  /// snapshot. Absent means zero.
  std::map<StageId, int> repeats;

  /// Throws std::invalid_argument if decomposition is not first, a stage is
  /// listed twice, or a repeat count is negative.
  void validate() const;
  bool includes(StageId stage) const;
  int repeats_of(StageId stage) const;
};

struct StageRecord {
  StageId stage;
  int repeat = 0;  // 0 for the first execution, then 1, 2, ...
  DeviceSet input;
  std::optional<FamilySnapshot> snapshot;  // empty for decomposition
  std::string question;
  std::string prompt;
  std::string raw_output;
  DeviceSet survivors;
  DeviceSet dropped;
};

enum class ChainStatusKind { complete, exhausted, evaluator_failed };

struct ChainStatus {
  ChainStatusKind kind = ChainStatusKind::complete;
  std::optional<StageId> stage;  // set for exhausted and evaluator_failed
  std::string message;

  std::string str() const;  // "complete", "exhausted_at(computing)", ...
  bool operator==(const ChainStatus& other) const { return kind == other.kind && stage == other.stage; }
};

struct EvaluationTrace {
  Task task;
  std::string evaluator;
  ChainSpec spec;
  SubproblemList subproblems;
  std::vector<StageRecord> records;
  DeviceSet initial_candidates;
  DeviceSet final_set;
  ChainStatus status;
  std::vector<CollectionLogEntry> collection_log;  // entries appended during this run
  std::map<StageId, int> reevaluations;

  const StageRecord* last_record_of(StageId stage) const;
  std::size_t collected_records() const;
};

/// Stage-1 decomposition via the evaluator, validated.
SubproblemList decompose_task(const Task& task, const Evaluator& evaluator);

struct StageOutcome {
  DeviceSet survivors;
  StageRecord record;
};

/// Collects the stage's family for `candidates`, merges it into
/// `accumulated`, and asks the evaluator. Survivors are clipped to the
/// candidates. EvaluatorFailure propagates.
StageOutcome run_stage(StageId stage, const DeviceSet& candidates, const Task& task, Registry& registry,
                       const Evaluator& evaluator, const std::string& question,
                       AccumulatedView& accumulated, std::uint64_t nonce = 0);

/// Full chain: decompose, then each evaluation stage on the previous
/// survivors. Stops at the first stage left with no candidates.
EvaluationTrace run_chain(const Task& task, Registry& registry, const Evaluator& evaluator,
                          const ChainSpec& spec = {}, std::uint64_t nonce = 0);

/// Re-runs `stage` on its original input with fresh data, then every stage
/// after it. Earlier records are kept as they were. Throws
/// std::invalid_argument if the trace never executed `stage`.
EvaluationTrace reevaluate_stage(const EvaluationTrace& trace, StageId stage, Registry& registry,
                                 const Evaluator& evaluator, std::uint64_t nonce = 0);

}  // namespace chaintrust
