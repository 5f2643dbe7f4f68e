#include <cctype>
#include <regex>

#include <fmt/format.h>

#include "chaintrust/model.hpp"

namespace chaintrust {

namespace {

constexpr std::string_view kSelfCheck = "I will verify the results myself";

std::string join_phrases(const std::vector<std::string>& items) {
  if (items.size() == 1) return items[0];
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += i + 1 == items.size() ? " and " : ", ";
    out += items[i];
  }
  return out;
}

}  // namespace

std::string_view article_for(std::string_view service) {
  const auto first = service.find_first_not_of(" \t");
  if (first == std::string_view::npos) return "a";
  switch (std::tolower(static_cast<unsigned char>(service[first]))) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return "an";
    default: return "a";
  }
}

std::string render_task_text(const Task& task) {
  validate_task(task);
  const bool all = task.wants_fast_comm && task.wants_secure_comm && task.wants_fast_compute &&
                   task.wants_secure_compute;
  std::string text = all ? fmt::format("I want to quickly and securely accomplish {} {} task", article_for(task.required_service),
                                     task.required_service)
                         : fmt::format("I want to accomplish {} {} task", article_for(task.required_service),
                                       task.required_service);
  if (!all) {
    std::vector<std::string> wants;
    if (task.wants_fast_comm) wants.emplace_back("fast transmission");
    if (task.wants_secure_comm) wants.emplace_back("secure transmission");
    if (task.wants_fast_compute) wants.emplace_back("fast execution");
    if (task.wants_secure_compute) wants.emplace_back("secure execution");
    if (!wants.empty()) text += " with " + join_phrases(wants);
  }
  if (!task.wants_honest_delivery) text += fmt::format("; {}", kSelfCheck);
  return text + ", which devices can be trusted to perform this task?";
}

Task parse_task_text(std::string_view text, DeviceId owner) {
  static const std::regex service(R"((?:accomplish|complete|perform|run|do)\s+an?\s+(.+?)\s+task\b)",
                                  std::regex::icase);
  const std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, service)) {
    throw std::invalid_argument(fmt::format("cannot find the requested service in '{}'", s));
  }
  auto has = [&](const char* pattern) { return std::regex_search(s, std::regex(pattern, std::regex::icase)); };

  Task task;
  task.owner = owner;
  task.text = s;
  task.required_service = m[1].str();
  const bool quickly = has(R"(\bquickly\b)");
  const bool securely = has(R"(\bsecurely\b)");
  task.wants_fast_comm = quickly || has(R"(\bfast transmission\b)");
  task.wants_secure_comm = securely || has(R"(\bsecure transmission\b)");
  task.wants_fast_compute = quickly || has(R"(\bfast execution\b)");
  task.wants_secure_compute = securely || has(R"(\bsecure execution\b)");
  task.wants_honest_delivery = s.find(kSelfCheck) == std::string::npos;
  return task;
}

}  // namespace chaintrust
