#include "chaintrust/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <fmt/format.h>

namespace chaintrust {

DeviceId::DeviceId(std::uint32_t index) : index_(index) {
  if (index == 0) throw std::invalid_argument("device index must be >= 1");
}

std::string DeviceId::str() const { return fmt::format("a{}", index_); }

DeviceId DeviceId::parse(std::string_view text) {
  auto fail = [&] { return std::invalid_argument(fmt::format("bad device id '{}'", text)); };
  if (text.empty() || text.front() != 'a') throw fail();
  text.remove_prefix(1);
  if (!text.empty() && text.front() == '_') text.remove_prefix(1);
  if (!text.empty() && text.front() == '{') {
    if (text.back() != '}') throw fail();
    text = text.substr(1, text.size() - 2);
  }
  if (text.empty() || text.front() == '0') throw fail();
  std::uint32_t index = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), index);
  if (ec != std::errc{} || end != text.data() + text.size()) throw fail();
  return DeviceId(index);
}

std::string render_set(const DeviceSet& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ' ';
    out += id.str();
  }
  return out;
}

namespace {

template <typename Enum, std::size_t N>
Enum parse_named(std::string_view text, const std::array<std::pair<Enum, std::string_view>, N>& names,
                 std::string_view what) {
  for (const auto& [value, name] : names) {
    if (name == text) return value;
  }
  throw std::invalid_argument(fmt::format("unknown {} '{}'", what, text));
}

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value, const std::array<std::pair<Enum, std::string_view>, N>& names) {
  for (const auto& [v, name] : names) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::array<std::pair<SecurityLevel, std::string_view>, 3> kSecurityNames{{
    {SecurityLevel::low, "low"}, {SecurityLevel::medium, "medium"}, {SecurityLevel::high, "high"}}};
constexpr std::array<std::pair<Loyalty, std::string_view>, 3> kLoyaltyNames{{
    {Loyalty::low, "low"}, {Loyalty::medium, "medium"}, {Loyalty::high, "high"}}};
constexpr std::array<std::pair<DeviceClass, std::string_view>, 5> kClassNames{{
    {DeviceClass::phone, "phone"},
    {DeviceClass::server, "server"},
    {DeviceClass::rosbot_plus, "rosbot_plus"},
    {DeviceClass::robofleet, "robofleet"},
    {DeviceClass::gpu_workstation, "gpu_workstation"}}};
constexpr std::array<std::pair<AttributeFamily, std::string_view>, 4> kFamilyNames{{
    {AttributeFamily::services, "services"},
    {AttributeFamily::communication, "communication"},
    {AttributeFamily::computing, "computing"},
    {AttributeFamily::result_delivery, "result_delivery"}}};
constexpr std::array<std::pair<StageId, std::string_view>, 5> kStageNames{{
    {StageId::decomposition, "decomposition"},
    {StageId::service_availability, "service_availability"},
    {StageId::communication, "communication"},
    {StageId::computing, "computing"},
    {StageId::result_delivery, "result_delivery"}}};

}  // namespace

std::string_view to_string(SecurityLevel level) { return name_of(level, kSecurityNames); }
std::string_view to_string(Loyalty loyalty) { return name_of(loyalty, kLoyaltyNames); }
std::string_view to_string(DeviceClass cls) { return name_of(cls, kClassNames); }
std::string_view to_string(AttributeFamily family) { return name_of(family, kFamilyNames); }
std::string_view to_string(StageId stage) { return name_of(stage, kStageNames); }

SecurityLevel parse_security(std::string_view text) {
  return parse_named(text, kSecurityNames, "security level");
}
Loyalty parse_loyalty(std::string_view text) { return parse_named(text, kLoyaltyNames, "loyalty"); }
DeviceClass parse_device_class(std::string_view text) {
  return parse_named(text, kClassNames, "device class");
}
AttributeFamily parse_family(std::string_view text) {
  return parse_named(text, kFamilyNames, "attribute family");
}
StageId parse_stage(std::string_view text) { return parse_named(text, kStageNames, "stage"); }

std::optional<AttributeFamily> family_of(StageId stage) {
  switch (stage) {
    case StageId::decomposition: return std::nullopt;
    case StageId::service_availability: return AttributeFamily::services;
    case StageId::communication: return AttributeFamily::communication;
    case StageId::computing: return AttributeFamily::computing;
    case StageId::result_delivery: return AttributeFamily::result_delivery;
  }
  return std::nullopt;
}

StageId stage_of(AttributeFamily family) {
  switch (family) {
    case AttributeFamily::services: return StageId::service_availability;
    case AttributeFamily::communication: return StageId::communication;
    case AttributeFamily::computing: return StageId::computing;
    case AttributeFamily::result_delivery: return StageId::result_delivery;
  }
  return StageId::service_availability;
}

std::string normalize_service(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_space = false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool device_supports(const Device& device, std::string_view service) {
  const auto wanted = normalize_service(service);
  if (wanted.empty()) return false;
  return std::any_of(device.services.begin(), device.services.end(),
                     [&](const std::string& s) { return normalize_service(s) == wanted; });
}

std::vector<std::string> validate_device(const Device& device) {
  std::vector<std::string> violations;
  if (device.services.empty()) violations.emplace_back("services empty");
  std::set<std::string> seen;
  for (const auto& s : device.services) {
    auto norm = normalize_service(s);
    if (norm.empty()) {
      violations.emplace_back("blank service name");
    } else if (!seen.insert(norm).second) {
      violations.push_back(fmt::format("duplicate service '{}'", s));
    }
  }
  // NaN fails both comparisons, so test for "not >= 0".
  if (!(device.comm.rate_mb_per_s >= 0.0)) violations.emplace_back("negative rate");
  if (!(device.compute.cpu_clock_ghz >= 0.0)) violations.emplace_back("negative cpu clock");
  return violations;
}

void validate_task(const Task& task) {
  if (normalize_service(task.required_service).empty()) {
    throw std::invalid_argument("task required_service is empty");
  }
}

void validate_subproblems(const SubproblemList& list) {
  std::optional<StageId> previous;
  for (const auto& sp : list) {
    if (sp.stage == StageId::decomposition) {
      throw std::invalid_argument("subproblem bound to the decomposition stage");
    }
    if (previous && !(*previous < sp.stage)) {
      throw std::invalid_argument("subproblems out of order or duplicated");
    }
    previous = sp.stage;
  }
}

}  // namespace chaintrust
