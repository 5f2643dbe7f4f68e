#include "chaintrust/pipeline.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

namespace chaintrust {

void ChainSpec::validate() const {
  std::set<StageId> seen;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i] == StageId::decomposition && i != 0) {
      throw std::invalid_argument("decomposition must be the first stage");
    }
    if (!seen.insert(stages[i]).second) {
      throw std::invalid_argument(fmt::format("stage {} listed twice", to_string(stages[i])));
    }
  }
  for (const auto& [stage, n] : repeats) {
    if (n < 0) throw std::invalid_argument("repeat counts must be >= 0");
  }
}

bool ChainSpec::includes(StageId stage) const {
  return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

int ChainSpec::repeats_of(StageId stage) const {
  auto it = repeats.find(stage);
  return it == repeats.end() ? 0 : it->second;
}

std::string ChainStatus::str() const {
  switch (kind) {
    case ChainStatusKind::complete: return "complete";
    case ChainStatusKind::exhausted: return fmt::format("exhausted_at({})", to_string(*stage));
    case ChainStatusKind::evaluator_failed: return fmt::format("evaluator_failed({})", to_string(*stage));
  }
  return "?";
}

const StageRecord* EvaluationTrace::last_record_of(StageId stage) const {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (it->stage == stage) return &*it;
  }
  return nullptr;
}

std::size_t EvaluationTrace::collected_records() const {
  std::size_t n = 0;
  for (const auto& e : collection_log) n += e.devices.size();
  return n;
}

SubproblemList decompose_task(const Task& task, const Evaluator& evaluator) {
  validate_task(task);
  auto d = evaluator.decompose(task);
  validate_subproblems(d.subproblems);
  return d.subproblems;
}

StageOutcome run_stage(StageId stage, const DeviceSet& candidates, const Task& task, Registry& registry,
                       const Evaluator& evaluator, const std::string& question,
                       AccumulatedView& accumulated, std::uint64_t nonce) {
  if (stage == StageId::decomposition) throw ContractViolation("run_stage needs an evaluation stage");
  if (candidates.empty()) throw ContractViolation("run_stage needs at least one candidate");

  auto snapshot = registry.collect(stage, candidates);
  merge_snapshot(accumulated, snapshot);
  const auto view = restrict_view(accumulated, candidates);

  const StageContext ctx{stage, question, task, snapshot, view, nonce};
  auto judgement = evaluator.judge(ctx);

  StageOutcome out;
  for (const auto& id : judgement.survivors) {
    if (candidates.contains(id)) {
      out.survivors.insert(id);
    } else {
      judgement.dropped.insert(id);
    }
  }
  out.record = StageRecord{stage,
                           0,
                           candidates,
                           std::move(snapshot),
                           question,
                           std::move(judgement.prompt),
                           std::move(judgement.raw_output),
                           out.survivors,
                           std::move(judgement.dropped)};
  return out;
}

namespace {

/// Evaluation stages in spec order, each with the question the decomposition
/// produced for it.
SubproblemList plan_of(const ChainSpec& spec, const SubproblemList& subproblems) {
  SubproblemList plan;
  for (auto stage : spec.stages) {
    auto it = std::find_if(subproblems.begin(), subproblems.end(),
                           [&](const Subproblem& sp) { return sp.stage == stage; });
    if (it != subproblems.end()) plan.push_back(*it);
  }
  return plan;
}

void execute_from(EvaluationTrace& trace, const SubproblemList& plan, std::size_t start, DeviceSet candidates,
                  AccumulatedView accumulated, Registry& registry, const Evaluator& evaluator,
                  std::uint64_t nonce) {
  trace.status = {};
  for (std::size_t k = start; k < plan.size(); ++k) {
    const auto& [stage, question] = plan[k];
    if (candidates.empty()) {
      trace.status = {ChainStatusKind::exhausted, stage, "no candidates left"};
      trace.final_set.clear();
      return;
    }
    const int runs = 1 + trace.spec.repeats_of(stage);
    for (int repeat = 0; repeat < runs && !candidates.empty(); ++repeat) {
      try {
        auto outcome = run_stage(stage, candidates, trace.task, registry, evaluator, question, accumulated, nonce);
        outcome.record.repeat = repeat;
        candidates = outcome.survivors;
        trace.records.push_back(std::move(outcome.record));
      } catch (const EvaluatorFailure& e) {
        StageRecord failed{stage, repeat, candidates, std::nullopt, question, e.prompt(), e.raw_output(), {}, {}};
        trace.records.push_back(std::move(failed));
        trace.status = {ChainStatusKind::evaluator_failed, stage, e.what()};
        trace.final_set.clear();
        return;
      }
    }
    if (candidates.empty()) {
      trace.status = {ChainStatusKind::exhausted, stage, "every candidate was filtered"};
      trace.final_set.clear();
      return;
    }
  }
  trace.final_set = candidates;
}

}  // namespace

EvaluationTrace run_chain(const Task& task, Registry& registry, const Evaluator& evaluator,
                          const ChainSpec& spec, std::uint64_t nonce) {
  spec.validate();
  validate_task(task);

  EvaluationTrace trace;
  trace.task = task;
  trace.evaluator = evaluator.label();
  trace.spec = spec;
  trace.initial_candidates = registry.ids();
  trace.initial_candidates.erase(task.owner);
  const auto log_start = registry.collection_log().size();

  if (spec.includes(StageId::decomposition)) {
    StageRecord record{StageId::decomposition, 0, trace.initial_candidates, std::nullopt, task.text,
                       {}, {}, trace.initial_candidates, {}};
    try {
      auto d = evaluator.decompose(task);
      validate_subproblems(d.subproblems);
      record.prompt = std::move(d.prompt);
      record.raw_output = std::move(d.raw_output);
      trace.subproblems = std::move(d.subproblems);
      trace.records.push_back(std::move(record));
    } catch (const EvaluatorFailure& e) {
      record.prompt = e.prompt();
      record.raw_output = e.raw_output();
      record.survivors.clear();
      trace.records.push_back(std::move(record));
      trace.status = {ChainStatusKind::evaluator_failed, StageId::decomposition, e.what()};
      return trace;
    } catch (const std::invalid_argument& e) {
      trace.records.push_back(std::move(record));
      trace.status = {ChainStatusKind::evaluator_failed, StageId::decomposition, e.what()};
      return trace;
    }
  } else {
    trace.subproblems = derive_subproblems(task);
  }

  const auto plan = plan_of(spec, trace.subproblems);
  execute_from(trace, plan, 0, trace.initial_candidates, {}, registry, evaluator, nonce);

  const auto& log = registry.collection_log();
  trace.collection_log.assign(log.begin() + static_cast<std::ptrdiff_t>(log_start), log.end());
  return trace;
}

EvaluationTrace reevaluate_stage(const EvaluationTrace& trace, StageId stage, Registry& registry,
                                 const Evaluator& evaluator, std::uint64_t nonce) {
  if (stage == StageId::decomposition) {
    throw std::invalid_argument("re-evaluate decomposition by running the chain again");
  }
  auto first = std::find_if(trace.records.begin(), trace.records.end(),
                            [&](const StageRecord& r) { return r.stage == stage; });
  if (first == trace.records.end()) {
    throw std::invalid_argument(fmt::format("stage {} was not executed in this trace", to_string(stage)));
  }

  const auto plan = plan_of(trace.spec, trace.subproblems);
  auto at = std::find_if(plan.begin(), plan.end(), [&](const Subproblem& sp) { return sp.stage == stage; });
  if (at == plan.end()) {
    throw std::invalid_argument(fmt::format("stage {} is not part of the chain plan", to_string(stage)));
  }

  EvaluationTrace next = trace;
  next.records.assign(trace.records.begin(), first);
  AccumulatedView accumulated;
  for (const auto& r : next.records) {
    if (r.snapshot) merge_snapshot(accumulated, *r.snapshot);
  }
  ++next.reevaluations[stage];

  const auto log_start = registry.collection_log().size();
  execute_from(next, plan, static_cast<std::size_t>(at - plan.begin()), first->input, std::move(accumulated),
               registry, evaluator, nonce);
  const auto& log = registry.collection_log();
  next.collection_log.insert(next.collection_log.end(), log.begin() + static_cast<std::ptrdiff_t>(log_start),
                             log.end());
  return next;
}

}  // namespace chaintrust
