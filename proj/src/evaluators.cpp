#include "chaintrust/evaluators.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

namespace chaintrust {

using nlohmann::json;

void RulePolicy::validate() const {
  if (!std::isfinite(fast_comm_min_rate_mb_s) || fast_comm_min_rate_mb_s < 0.0) {
    throw std::invalid_argument("fast_comm_min_rate_mb_s must be a non-negative number");
  }
  if (!std::isfinite(fast_compute_min_ghz) || fast_compute_min_ghz < 0.0) {
    throw std::invalid_argument("fast_compute_min_ghz must be a non-negative number");
  }
}

void ExemplarSet::set(StageId stage, std::vector<Exemplar> exemplars) {
  if (exemplars.empty()) {
    throw std::invalid_argument(fmt::format("stage {} needs at least one exemplar", to_string(stage)));
  }
  by_stage_[stage] = std::move(exemplars);
}

const std::vector<Exemplar>& ExemplarSet::of(StageId stage) const {
  auto it = by_stage_.find(stage);
  if (it == by_stage_.end()) {
    throw std::out_of_range(fmt::format("no exemplars for stage {}", to_string(stage)));
  }
  return it->second;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<Exemplar> read_exemplars(const json& array, const std::filesystem::path& path) {
  if (!array.is_array()) throw std::runtime_error(fmt::format("{}: 'exemplars' must be an array", path.string()));
  std::vector<Exemplar> out;
  for (const auto& item : array) {
    if (!item.is_object() || !item.contains("question") || !item.contains("answer")) {
      throw std::runtime_error(fmt::format("{}: each exemplar needs question and answer", path.string()));
    }
    out.push_back({item.at("question").get<std::string>(), item.at("answer").get<std::string>()});
  }
  return out;
}

bool at_least(SecurityLevel have, SecurityLevel need) { return have >= need; }

bool comm_ok(const RulePolicy& p, const Task& t, const CommAttributes& c) {
  return (!t.wants_fast_comm || c.rate_mb_per_s >= p.fast_comm_min_rate_mb_s) &&
         (!t.wants_secure_comm || at_least(c.security, p.secure_comm_min));
}

bool compute_ok(const RulePolicy& p, const Task& t, const ComputeAttributes& c) {
  const bool fast = c.cpu_clock_ghz >= p.fast_compute_min_ghz || (p.gpu_counts_as_fast && c.has_gpu);
  return (!t.wants_fast_compute || fast) && (!t.wants_secure_compute || at_least(c.security, p.secure_compute_min));
}

bool delivery_ok(const RulePolicy& p, const ResultDeliveryAttribute& d) {
  return d.loyalty >= p.honest_delivery_min;
}

bool services_ok(const Task& t, const ServiceList& services) {
  Device probe;
  probe.services = services;
  return device_supports(probe, t.required_service);
}

bool passes(const RulePolicy& p, const Task& t, const FamilyPayload& values) {
  return std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ServiceList>) {
          return services_ok(t, v);
        } else if constexpr (std::is_same_v<T, CommAttributes>) {
          return comm_ok(p, t, v);
        } else if constexpr (std::is_same_v<T, ComputeAttributes>) {
          return compute_ok(p, t, v);
        } else {
          return delivery_ok(p, v);
        }
      },
      values);
}

}  // namespace

ExemplarSet ExemplarSet::load(const std::filesystem::path& dir) {
  ExemplarSet set;
  for (auto stage : {StageId::decomposition, StageId::service_availability, StageId::communication,
                     StageId::computing, StageId::result_delivery}) {
    const auto path = dir / fmt::format("{}.json", to_string(stage));
    const auto doc = read_json_file(path);
    if (!doc.is_object()) throw std::runtime_error(fmt::format("{}: expected an object", path.string()));
    for (const auto& [key, _] : doc.items()) {
      if (key != "stage" && key != "exemplars") {
        throw std::runtime_error(fmt::format("{}: unknown field '{}'", path.string(), key));
      }
    }
    if (doc.value("stage", "") != to_string(stage)) {
      throw std::runtime_error(fmt::format("{}: stage field must be '{}'", path.string(), to_string(stage)));
    }
    set.set(stage, read_exemplars(doc.at("exemplars"), path));
  }
  return set;
}

BaselinePrompts BaselinePrompts::load(const std::filesystem::path& file) {
  const auto doc = read_json_file(file);
  BaselinePrompts out;
  if (doc.contains("chain_of_thought_exemplars")) {
    out.chain_of_thought_exemplars = read_exemplars(doc["chain_of_thought_exemplars"], file);
  }
  out.reasoning_instruction = doc.value("reasoning_instruction", out.reasoning_instruction);
  out.answer_instruction = doc.value("answer_instruction", out.answer_instruction);
  return out;
}

EvaluatorFailure::EvaluatorFailure(const std::string& message, std::string prompt, std::string raw_output)
    : std::runtime_error(message), prompt_(std::move(prompt)), raw_output_(std::move(raw_output)) {}

DeviceSet rule_judge(const RulePolicy& policy, StageId stage, const Task& task,
                     const FamilySnapshot& snapshot) {
  const auto family = family_of(stage);
  if (!family || *family != snapshot.family) {
    throw ContractViolation(fmt::format("stage {} cannot judge a {} snapshot", to_string(stage),
                                        to_string(snapshot.family)));
  }
  DeviceSet out;
  for (const auto& [id, entry] : snapshot.entries) {
    if (passes(policy, task, entry.values)) out.insert(id);
  }
  return out;
}

std::string describe_predicate(const RulePolicy& policy, StageId stage, const Task& task) {
  std::vector<std::string> terms;
  switch (stage) {
    case StageId::service_availability:
      terms.push_back(fmt::format("offers '{}'", normalize_service(task.required_service)));
      break;
    case StageId::communication:
      if (task.wants_fast_comm) terms.push_back(fmt::format("rate >= {}", format_rate(policy.fast_comm_min_rate_mb_s)));
      if (task.wants_secure_comm) {
        terms.push_back(fmt::format("communication security >= {}", to_string(policy.secure_comm_min)));
      }
      break;
    case StageId::computing:
      if (task.wants_fast_compute) {
        terms.push_back(fmt::format("(cpu >= {} GHz{})", policy.fast_compute_min_ghz,
                                    policy.gpu_counts_as_fast ? " or has gpu" : ""));
      }
      if (task.wants_secure_compute) {
        terms.push_back(fmt::format("computing security >= {}", to_string(policy.secure_compute_min)));
      }
      break;
    case StageId::result_delivery:
      terms.push_back(fmt::format("loyalty >= {}", to_string(policy.honest_delivery_min)));
      break;
    case StageId::decomposition:
      return "derive subproblems from task flags";
  }
  if (terms.empty()) return "true";
  return fmt::format("{}", fmt::join(terms, " and "));
}

RuleEvaluator::RuleEvaluator(RulePolicy policy) : policy_(policy) { policy_.validate(); }

Decomposition RuleEvaluator::decompose(const Task& task) const {
  Decomposition d;
  d.subproblems = derive_subproblems(task);
  d.prompt = describe_predicate(policy_, StageId::decomposition, task);
  d.raw_output = render_decomposition_answer(task, d.subproblems);
  return d;
}

Judgement RuleEvaluator::judge(const StageContext& ctx) const {
  Judgement j;
  j.survivors = rule_judge(policy_, ctx.stage, ctx.task, ctx.snapshot);
  j.prompt = describe_predicate(policy_, ctx.stage, ctx.task);
  j.raw_output = render_stage_answer(ctx.stage, ctx.question, j.survivors);
  return j;
}

Judgement RuleEvaluator::select(SinglePromptStyle, const Task& task, const AccumulatedView& devices,
                                std::uint64_t) const {
  Judgement j;
  std::vector<std::string> terms;
  for (auto stage : kEvaluationStages) {
    if (stage == StageId::result_delivery && !task.wants_honest_delivery) continue;
    terms.push_back(describe_predicate(policy_, stage, task));
  }
  j.prompt = fmt::format("{}", fmt::join(terms, " and "));
  for (const auto& [id, dv] : devices) {
    if (!dv.services || !dv.comm || !dv.compute || !dv.delivery) {
      throw ContractViolation(fmt::format("single-prompt selection needs every family for {}", id.str()));
    }
    bool ok = services_ok(task, *dv.services) && comm_ok(policy_, task, *dv.comm) &&
              compute_ok(policy_, task, *dv.compute);
    if (task.wants_honest_delivery) ok = ok && delivery_ok(policy_, *dv.delivery);
    if (ok) j.survivors.insert(id);
  }
  j.raw_output = j.survivors.empty() ? "Trusted devices: none"
                                     : fmt::format("Trusted devices: {}", render_set(j.survivors));
  return j;
}

PromptEvaluator::PromptEvaluator(std::shared_ptr<Transport> transport, ExemplarSet exemplars,
                                 BaselinePrompts baselines, std::string label)
    : transport_(std::move(transport)),
      exemplars_(std::move(exemplars)),
      baselines_(std::move(baselines)),
      label_(std::move(label)) {
  if (!transport_) throw std::invalid_argument("PromptEvaluator needs a transport");
}

std::string PromptEvaluator::ask(const std::string& prompt) const {
  try {
    return transport_->complete(prompt);
  } catch (const TransportError& e) {
    throw EvaluatorFailure(e.what(), prompt);
  }
}

Decomposition PromptEvaluator::decompose(const Task& task) const {
  validate_task(task);
  Decomposition d;
  d.prompt = build_decomposition_prompt(exemplars_, task).text;
  d.raw_output = ask(d.prompt);
  try {
    d.subproblems = parse_decomposition(d.raw_output);
  } catch (const UnparseableResponse& e) {
    throw EvaluatorFailure(e.what(), d.prompt, d.raw_output);
  }
  return d;
}

Judgement llm_judge(Transport& transport, const ExemplarSet& exemplars, const StageContext& ctx) {
  const auto bundle =
      build_prompt(ctx.stage, exemplars, ctx.snapshot, ctx.accumulated, ctx.question, ctx.task.owner);
  Judgement j;
  j.prompt = bundle.text;
  try {
    j.raw_output = transport.complete(bundle.text);
  } catch (const TransportError& e) {
    throw EvaluatorFailure(e.what(), j.prompt);
  }
  try {
    auto parsed = parse_device_list(j.raw_output, ctx.snapshot.ids());
    j.survivors = std::move(parsed.survivors);
    j.dropped = std::move(parsed.dropped);
  } catch (const UnparseableResponse& e) {
    throw EvaluatorFailure(e.what(), j.prompt, j.raw_output);
  }
  return j;
}

Judgement PromptEvaluator::judge(const StageContext& ctx) const { return llm_judge(*transport_, exemplars_, ctx); }

Judgement PromptEvaluator::select(SinglePromptStyle style, const Task& task, const AccumulatedView& devices,
                                  std::uint64_t) const {
  Judgement j;
  j.prompt = build_single_prompt(style, baselines_, task, devices);
  j.raw_output = ask(j.prompt);
  DeviceSet candidates;
  for (const auto& [id, _] : devices) candidates.insert(id);
  try {
    auto parsed = parse_final_answer(j.raw_output, candidates);
    j.survivors = std::move(parsed.survivors);
    j.dropped = std::move(parsed.dropped);
  } catch (const UnparseableResponse& e) {
    throw EvaluatorFailure(e.what(), j.prompt, j.raw_output);
  }
  return j;
}

}  // namespace chaintrust
