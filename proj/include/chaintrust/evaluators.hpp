#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaintrust/gateway.hpp"
#include "chaintrust/model.hpp"
#include "chaintrust/registry.hpp"

namespace chaintrust {

/// Everything revealed about one candidate so far in a chain run.
struct DeviceView {
  DeviceId id;
  std::optional<ServiceList> services;
  std::optional<CommAttributes> comm;
  std::optional<ComputeAttributes> compute;
  std::optional<ResultDeliveryAttribute> delivery;

  bool has(AttributeFamily family) const;
  bool operator==(const DeviceView&) const = default;
};

using AccumulatedView = std::map<DeviceId, DeviceView>;

/// Folds a snapshot's family into the view, adding devices as needed.
void merge_snapshot(AccumulatedView& view, const FamilySnapshot& snapshot);

/// The view restricted to `ids`.
AccumulatedView restrict_view(const AccumulatedView& view, const DeviceSet& ids);

struct RulePolicy {
  double fast_comm_min_rate_mb_s = 10.0;
  SecurityLevel secure_comm_min = SecurityLevel::high;
  double fast_compute_min_ghz = 2.0;
  bool gpu_counts_as_fast = true;
  SecurityLevel secure_compute_min = SecurityLevel::high;
  Loyalty honest_delivery_min = Loyalty::high;

  /// Throws std::invalid_argument on negative or non-finite thresholds.
  void validate() const;
  bool operator==(const RulePolicy&) const = default;
};

struct Exemplar {
  std::string question;
  std::string answer;

  bool operator==(const Exemplar&) const = default;
};

/// Few-shot (question, answer) pairs per stage.
class ExemplarSet {
 public:
  ExemplarSet() = default;

  void set(StageId stage, std::vector<Exemplar> exemplars);
  const std::vector<Exemplar>& of(StageId stage) const;
  bool has(StageId stage) const { return by_stage_.contains(stage); }

  /// Reads `<stage>.json` for every stage from `dir`.
  static ExemplarSet load(const std::filesystem::path& dir);

 private:
  std::map<StageId, std::vector<Exemplar>> by_stage_;
};

/// Wording for the single-prompt baselines.
struct BaselinePrompts {
  std::vector<Exemplar> chain_of_thought_exemplars;
  std::string reasoning_instruction = "Let's think step by step.";
  std::string answer_instruction =
      "End your reply with one line of the form \"Trusted devices: a2, a5\" or \"Trusted "
      "devices: none\".";

  static BaselinePrompts load(const std::filesystem::path& file);
};

enum class SinglePromptStyle { chain_of_thought, standard };

struct PromptBundle {
  StageId stage;
  std::string exemplar_block;
  std::string data_block;
  std::string question;
  std::string text;
};

// -- rendering -------------------------------------------------------------

std::string format_rate(double mb_per_s);        // "40MB/s"
std::string format_clock(double ghz);            // "CPU 168 MHz", "CPU 3.8 GHz"
std::string format_compute_power(const ComputeAttributes& compute);

/// "a8 = {{service : ...}; {communication attributes: {...}}}".
std::string render_device(const DeviceView& view);

/// Question for an evaluation stage, worded from the task's flags.
std::string render_question(StageId stage, const Task& task);

/// Subproblems the task needs, in canonical stage order. Result delivery is
/// included only when the task asks for honest delivery.
SubproblemList derive_subproblems(const Task& task);

/// Decomposition answer in the worked-example style.
std::string render_decomposition_answer(const Task& task, const SubproblemList& subproblems);

/// "Devices a8, a10, and a11 can ensure the honest return of results."
std::string render_stage_answer(StageId stage, const std::string& question, const DeviceSet& survivors);

std::string render_exemplar_block(const std::vector<Exemplar>& exemplars);

PromptBundle build_decomposition_prompt(const ExemplarSet& exemplars, const Task& task);

/// Stage prompt: exemplar block, then every candidate with all attributes
/// revealed so far, then the question. Devices are rendered by ascending
/// index. Throws ContractViolation on an empty candidate set.
PromptBundle build_prompt(StageId stage, const ExemplarSet& exemplars, const FamilySnapshot& snapshot,
                          const AccumulatedView& accumulated, const std::string& question,
                          DeviceId owner);

std::string build_single_prompt(SinglePromptStyle style, const BaselinePrompts& baselines,
                                const Task& task, const AccumulatedView& devices);

// -- parsing ---------------------------------------------------------------

class UnparseableResponse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParsedDevices {
  DeviceSet survivors;
  DeviceSet dropped;  // ids named in the response but not among the candidates
};

/// Every device-id token ("a8", "a_8", "$a_{8}$", "a₈") in order of appearance.
std::vector<DeviceId> extract_device_ids(std::string_view text);

/// Throws UnparseableResponse when the text names no device and does not
/// say that none qualify.
ParsedDevices parse_device_list(std::string_view response, const DeviceSet& candidates);

/// Like parse_device_list, but reads only what follows the last
/// "Trusted devices:" marker when one is present.
ParsedDevices parse_final_answer(std::string_view response, const DeviceSet& candidates);

/// Reads "subproblem N: question" items and binds each to a stage.
SubproblemList parse_decomposition(std::string_view response);

/// Service name inside "which devices support the X service?".
std::optional<std::string> service_from_question(std::string_view question);

// -- evaluator contract ----------------------------------------------------

struct StageContext {
  StageId stage;
  const std::string& question;
  const Task& task;
  const FamilySnapshot& snapshot;
  const AccumulatedView& accumulated;
  std::uint64_t nonce = 0;  // distinguishes independent runs (benchmark task index)
};

struct Judgement {
  DeviceSet survivors;
  std::string prompt;  // prompt text, or a predicate description for rule evaluation
  std::string raw_output;
  DeviceSet dropped;
};

struct Decomposition {
  SubproblemList subproblems;
  std::string prompt;
  std::string raw_output;
};

class EvaluatorFailure : public std::runtime_error {
 public:
  EvaluatorFailure(const std::string& message, std::string prompt = {}, std::string raw_output = {});
  const std::string& prompt() const { return prompt_; }
  const std::string& raw_output() const { return raw_output_; }

 private:
  std::string prompt_;
  std::string raw_output_;
};

/// Decides which candidates survive each stage. Implementations hold no
/// mutable state of their own and may be shared across concurrent runs.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual std::string label() const = 0;
  virtual Decomposition decompose(const Task& task) const = 0;
  /// Survivors must be drawn from ctx.snapshot's devices.
  virtual Judgement judge(const StageContext& ctx) const = 0;
  /// One-shot selection over every device with every attribute.
  virtual Judgement select(SinglePromptStyle style, const Task& task, const AccumulatedView& devices,
                           std::uint64_t nonce) const = 0;
};

/// Stage predicate over one family snapshot. Throws ContractViolation when
/// the snapshot family does not belong to `stage`.
DeviceSet rule_judge(const RulePolicy& policy, StageId stage, const Task& task,
                     const FamilySnapshot& snapshot);

std::string describe_predicate(const RulePolicy& policy, StageId stage, const Task& task);

class RuleEvaluator : public Evaluator {
 public:
  explicit RuleEvaluator(RulePolicy policy = {});

  std::string label() const override { return "rule"; }
  Decomposition decompose(const Task& task) const override;
  Judgement judge(const StageContext& ctx) const override;
  Judgement select(SinglePromptStyle style, const Task& task, const AccumulatedView& devices,
                   std::uint64_t nonce) const override;

  const RulePolicy& policy() const { return policy_; }

 private:
  RulePolicy policy_;
};

/// Few-shot prompting over a completion transport.
class PromptEvaluator : public Evaluator {
 public:
  PromptEvaluator(std::shared_ptr<Transport> transport, ExemplarSet exemplars,
                  BaselinePrompts baselines = {}, std::string label = "llm");

  std::string label() const override { return label_; }
  Decomposition decompose(const Task& task) const override;
  Judgement judge(const StageContext& ctx) const override;
  Judgement select(SinglePromptStyle style, const Task& task, const AccumulatedView& devices,
                   std::uint64_t nonce) const override;

 private:
  std::string ask(const std::string& prompt) const;

  std::shared_ptr<Transport> transport_;
  ExemplarSet exemplars_;
  BaselinePrompts baselines_;
  std::string label_;
};

/// Builds the prompt, asks the transport, parses the survivors.
Judgement llm_judge(Transport& transport, const ExemplarSet& exemplars, const StageContext& ctx);

}  // namespace chaintrust
