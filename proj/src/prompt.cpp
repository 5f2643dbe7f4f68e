// Prompt rendering and response parsing for the few-shot evaluator.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

#include <fmt/format.h>

#include "chaintrust/evaluators.hpp"

namespace chaintrust {

bool DeviceView::has(AttributeFamily family) const {
  switch (family) {
    case AttributeFamily::services: return services.has_value();
    case AttributeFamily::communication: return comm.has_value();
    case AttributeFamily::computing: return compute.has_value();
    case AttributeFamily::result_delivery: return delivery.has_value();
  }
  return false;
}

namespace {

DeviceView empty_view(DeviceId id) {
  DeviceView v;
  v.id = id;
  return v;
}

}  // namespace

void merge_snapshot(AccumulatedView& view, const FamilySnapshot& snapshot) {
  for (const auto& [id, entry] : snapshot.entries) {
    auto& dv = view.try_emplace(id, empty_view(id)).first->second;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, ServiceList>) {
            dv.services = v;
          } else if constexpr (std::is_same_v<T, CommAttributes>) {
            dv.comm = v;
          } else if constexpr (std::is_same_v<T, ComputeAttributes>) {
            dv.compute = v;
          } else {
            dv.delivery = v;
          }
        },
        entry.values);
  }
}

AccumulatedView restrict_view(const AccumulatedView& view, const DeviceSet& ids) {
  AccumulatedView out;
  for (const auto& id : ids) {
    auto it = view.find(id);
    out.emplace(id, it != view.end() ? it->second : empty_view(id));
  }
  return out;
}

namespace {

// Six significant decimals is plenty for rates and clocks and keeps
// 0.168 GHz rendering as "168" rather than "168.00000000000003".
double tidy(double value) { return std::round(value * 1e6) / 1e6; }

std::string join_services(const ServiceList& services) { return fmt::format("{}", fmt::join(services, ", ")); }

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string_view first_stage_subject(AttributeFamily family) {
  switch (family) {
    case AttributeFamily::services: return "supported services";
    case AttributeFamily::communication: return "communication attributes";
    case AttributeFamily::computing: return "computing attributes";
    case AttributeFamily::result_delivery: return "result delivery attributes";
  }
  return "attributes";
}

std::string qualifier(bool fast, bool secure) {
  if (fast && secure) return "secure and fast";
  if (secure) return "secure";
  if (fast) return "fast";
  return "reliable";
}

/// "a8", "a8 and a10", "a8, a10, and a11".
std::string join_ids(const DeviceSet& ids) {
  std::vector<std::string> names;
  for (const auto& id : ids) names.push_back(id.str());
  if (names.size() == 1) return names[0];
  if (names.size() == 2) return names[0] + " and " + names[1];
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i + 1 == names.size()) {
      out += "and " + names[i];
    } else {
      out += names[i] + ", ";
    }
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string format_rate(double mb_per_s) { return fmt::format("{}MB/s", tidy(mb_per_s)); }

std::string format_clock(double ghz) {
  if (ghz < 1.0) return fmt::format("CPU {} MHz", tidy(ghz * 1000.0));
  return fmt::format("CPU {} GHz", tidy(ghz));
}

std::string format_compute_power(const ComputeAttributes& compute) {
  auto out = format_clock(compute.cpu_clock_ghz);
  if (compute.has_gpu) out += ", GPU";
  return out;
}

std::string render_device(const DeviceView& view) {
  std::string body;
  auto append = [&](std::string_view separator, const std::string& block) {
    if (!body.empty()) body += separator;
    body += block;
  };
  if (view.services) append("; ", fmt::format("{{service : {}}}", join_services(*view.services)));
  if (view.comm) {
    append("; ", fmt::format("{{communication attributes: {{communication rate: {}; communication "
                             "security: {}}}}}",
                             format_rate(view.comm->rate_mb_per_s), to_string(view.comm->security)));
  }
  if (view.compute) {
    append(";", fmt::format("{{computing attributes: {{computing power: {}; computing security: {}}}}}",
                            format_compute_power(*view.compute), to_string(view.compute->security)));
  }
  if (view.delivery) append("; ", fmt::format("{{result delivery: {}}}", to_string(view.delivery->loyalty)));
  return fmt::format("{} = {{{}}}", view.id.str(), body);
}

std::string render_question(StageId stage, const Task& task) {
  switch (stage) {
    case StageId::service_availability:
      return fmt::format("which devices support the {} service?", trim(task.required_service));
    case StageId::communication:
      return fmt::format("which devices can ensure the task transmission process is {}?",
                         qualifier(task.wants_fast_comm, task.wants_secure_comm));
    case StageId::computing:
      return fmt::format("which devices can ensure the task execution process is {}?",
                         qualifier(task.wants_fast_compute, task.wants_secure_compute));
    case StageId::result_delivery:
      return "which devices can ensure the honest return of results?";
    case StageId::decomposition:
      break;
  }
  throw ContractViolation("the decomposition stage has no question");
}

SubproblemList derive_subproblems(const Task& task) {
  validate_task(task);
  SubproblemList out;
  for (auto stage : kEvaluationStages) {
    if (stage == StageId::result_delivery && !task.wants_honest_delivery) continue;
    out.push_back({stage, render_question(stage, task)});
  }
  return out;
}

std::string render_decomposition_answer(const Task& task, const SubproblemList& subproblems) {
  const bool fast = task.wants_fast_comm || task.wants_fast_compute;
  const bool secure = task.wants_secure_comm || task.wants_secure_compute;
  std::string manner;
  if (fast && secure) {
    manner = " quickly and securely";
  } else if (fast) {
    manner = " quickly";
  } else if (secure) {
    manner = " securely";
  }
  auto out = fmt::format(
      "You aim to find trusted devices that can complete {} {} task{}. To achieve this, the "
      "following subproblems need to be addressed sequentially:",
      article_for(task.required_service), trim(task.required_service), manner);
  for (std::size_t i = 0; i < subproblems.size(); ++i) {
    out += fmt::format(" subproblem {}: {}", i + 1, subproblems[i].question);
  }
  return out;
}

std::string render_stage_answer(StageId stage, const std::string& question, const DeviceSet& survivors) {
  // Predicate of the answer sentence: "offer the X service" or "can ensure ...".
  std::string predicate;
  std::string singular;
  if (stage == StageId::service_availability) {
    const auto service = service_from_question(question).value_or("requested");
    predicate = fmt::format("offer the {} service", service);
    singular = fmt::format("offers the {} service", service);
  } else {
    static const std::regex ensure(R"(can (ensure .*?)\??$)");
    std::smatch m;
    const auto tail = std::regex_search(question, m, ensure) ? m[1].str() : std::string("qualify");
    predicate = "can " + tail;
    singular = predicate;
  }
  if (survivors.empty()) {
    const auto verb = stage == StageId::service_availability ? singular : predicate;
    return fmt::format("None of the devices {}.", verb);
  }
  if (survivors.size() == 1) return fmt::format("Device {} {}.", join_ids(survivors), singular);
  return fmt::format("Devices {} {}.", join_ids(survivors), predicate);
}

std::string render_exemplar_block(const std::vector<Exemplar>& exemplars) {
  std::string out;
  for (const auto& e : exemplars) out += fmt::format("Q: {}\nA: {}\n\n", e.question, e.answer);
  return out;
}

PromptBundle build_decomposition_prompt(const ExemplarSet& exemplars, const Task& task) {
  PromptBundle b{StageId::decomposition, {}, {}, task.text, {}};
  if (exemplars.has(StageId::decomposition)) {
    b.exemplar_block = render_exemplar_block(exemplars.of(StageId::decomposition));
  }
  b.text = fmt::format("{}Q: {}\nA:", b.exemplar_block, task.text);
  return b;
}

PromptBundle build_prompt(StageId stage, const ExemplarSet& exemplars, const FamilySnapshot& snapshot,
                          const AccumulatedView& accumulated, const std::string& question,
                          DeviceId owner) {
  const auto family = family_of(stage);
  if (!family) throw ContractViolation("build_prompt needs an evaluation stage");
  if (*family != snapshot.family) throw ContractViolation("snapshot family does not match stage");
  if (snapshot.entries.empty()) throw ContractViolation("cannot build a prompt for zero candidates");

  auto view = restrict_view(accumulated, snapshot.ids());
  merge_snapshot(view, snapshot);

  // Only this stage's family known so far: this is the opening stage.
  const bool opening = std::all_of(view.begin(), view.end(), [&](const auto& kv) {
    return std::all_of(kAllFamilies.begin(), kAllFamilies.end(), [&](AttributeFamily f) {
      return f == *family || !kv.second.has(f);
    });
  });

  std::vector<std::string> lines;
  for (const auto& [id, dv] : view) lines.push_back(render_device(dv));
  const auto devices = fmt::format("{}", fmt::join(lines, ", "));

  PromptBundle b;
  b.stage = stage;
  b.question = question;
  if (exemplars.has(stage)) b.exemplar_block = render_exemplar_block(exemplars.of(stage));
  std::string query;
  if (opening) {
    b.data_block = fmt::format("The collected devices and their {} are described as: {}. {} is the task owner.",
                               first_stage_subject(*family), devices, owner.str());
    query = fmt::format("{} {}", b.data_block, capitalize(question));
  } else {
    b.data_block = fmt::format("Devices {}", devices);
    query = fmt::format("{}, {}", b.data_block, question);
  }
  b.text = fmt::format("{}Q: {}\nA:", b.exemplar_block, query);
  return b;
}

std::string build_single_prompt(SinglePromptStyle style, const BaselinePrompts& baselines,
                                const Task& task, const AccumulatedView& devices) {
  std::vector<std::string> lines;
  for (const auto& [id, dv] : devices) lines.push_back(render_device(dv));
  const auto data = fmt::format(
      "The collected devices and their attributes are described as: {}. {} is the task owner.",
      fmt::join(lines, ", "), task.owner.str());
  if (style == SinglePromptStyle::chain_of_thought) {
    return fmt::format("{}Q: {} {} {}\nA: {}", render_exemplar_block(baselines.chain_of_thought_exemplars),
                       data, task.text, baselines.answer_instruction, baselines.reasoning_instruction);
  }
  return fmt::format("Q: {} {} {}\nA:", data, task.text, baselines.answer_instruction);
}

std::vector<DeviceId> extract_device_ids(std::string_view text) {
  std::vector<DeviceId> out;
  const auto n = text.size();
  auto is_alnum = [&](std::size_t i) { return std::isalnum(static_cast<unsigned char>(text[i])) != 0; };
  for (std::size_t i = 0; i < n; ++i) {
    if (text[i] != 'a' || (i > 0 && is_alnum(i - 1))) continue;
    std::size_t j = i + 1;
    if (j < n && text[j] == '_') ++j;
    bool braced = false;
    if (j < n && text[j] == '{') {
      braced = true;
      ++j;
    }
    std::uint64_t value = 0;
    int digits = 0;
    while (j < n && digits < 9) {
      if (std::isdigit(static_cast<unsigned char>(text[j]))) {
        value = value * 10 + static_cast<unsigned>(text[j] - '0');
        ++j;
      } else if (j + 2 < n && static_cast<unsigned char>(text[j]) == 0xE2 &&
                 static_cast<unsigned char>(text[j + 1]) == 0x82 &&
                 static_cast<unsigned char>(text[j + 2]) >= 0x80 &&
                 static_cast<unsigned char>(text[j + 2]) <= 0x89) {
        // Unicode subscript digits U+2080..U+2089.
        value = value * 10 + (static_cast<unsigned char>(text[j + 2]) - 0x80);
        j += 3;
      } else {
        break;
      }
      ++digits;
    }
    if (digits == 0) continue;
    if (braced) {
      if (j >= n || text[j] != '}') continue;
      ++j;
    }
    if (j < n && is_alnum(j)) continue;
    if (value >= 1) out.emplace_back(static_cast<std::uint32_t>(value));
    i = j - 1;
  }
  return out;
}

ParsedDevices parse_device_list(std::string_view response, const DeviceSet& candidates) {
  ParsedDevices out;
  const auto ids = extract_device_ids(response);
  if (ids.empty()) {
    static const std::regex none(R"(\b(none|no devices?|no device can|not any)\b)", std::regex::icase);
    const std::string text(response);
    if (std::regex_search(text, none)) return out;
    throw UnparseableResponse(fmt::format("no device ids in response: '{}'", text.substr(0, 200)));
  }
  for (const auto& id : ids) {
    if (candidates.contains(id)) {
      out.survivors.insert(id);
    } else {
      out.dropped.insert(id);
    }
  }
  return out;
}

ParsedDevices parse_final_answer(std::string_view response, const DeviceSet& candidates) {
  const auto text = lower(response);
  const auto marker = text.rfind("trusted devices:");
  if (marker == std::string::npos) return parse_device_list(response, candidates);
  return parse_device_list(response.substr(marker + 16), candidates);
}

std::optional<std::string> service_from_question(std::string_view question) {
  static const std::regex pattern(R"(supports? the (.+?) services?\b)", std::regex::icase);
  const std::string text(question);
  std::smatch m;
  if (!std::regex_search(text, m, pattern)) return std::nullopt;
  return trim(m[1].str());
}

SubproblemList parse_decomposition(std::string_view response) {
  static const std::regex marker(R"(subproblem\s*(\d+)\s*:)", std::regex::icase);
  const std::string text(response);
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [question start, marker start)
  for (auto it = std::sregex_iterator(text.begin(), text.end(), marker); it != std::sregex_iterator(); ++it) {
    spans.emplace_back(static_cast<std::size_t>(it->position() + it->length()),
                       static_cast<std::size_t>(it->position()));
  }
  if (spans.empty()) throw UnparseableResponse("decomposition names no subproblems");

  SubproblemList out;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto begin = spans[k].first;
    const auto end = k + 1 < spans.size() ? spans[k + 1].second : text.size();
    auto question = trim(std::string_view(text).substr(begin, end - begin));
    if (auto q = question.find('?'); q != std::string::npos) question.resize(q + 1);
    const auto l = lower(question);

    StageId stage;
    if (l.find("support") != std::string::npos && l.find("service") != std::string::npos) {
      stage = StageId::service_availability;
    } else if (l.find("transmission") != std::string::npos || l.find("communication") != std::string::npos) {
      stage = StageId::communication;
    } else if (l.find("execution") != std::string::npos || l.find("comput") != std::string::npos) {
      stage = StageId::computing;
    } else if (l.find("honest") != std::string::npos || l.find("result") != std::string::npos) {
      stage = StageId::result_delivery;
    } else {
      throw UnparseableResponse(fmt::format("cannot bind subproblem '{}' to a stage", question));
    }
    out.push_back({stage, question});
  }
  try {
    validate_subproblems(out);
  } catch (const std::invalid_argument& e) {
    throw UnparseableResponse(e.what());
  }
  return out;
}

}  // namespace chaintrust
