#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chaintrust {

/// Identity of one collaborator. Renders as "a<index>".
class DeviceId {
 public:
  constexpr DeviceId() = default;
  explicit DeviceId(std::uint32_t index);

  std::uint32_t index() const { return index_; }
  std::string str() const;

  /// Accepts "a8", "a_8" and "a_{8}". Throws std::invalid_argument otherwise.
  static DeviceId parse(std::string_view text);

  auto operator<=>(const DeviceId&) const = default;

 private:
  std::uint32_t index_ = 1;
};

using DeviceSet = std::set<DeviceId>;

std::string render_set(const DeviceSet& ids);

enum class SecurityLevel { low = 0, medium = 1, high = 2 };
enum class Loyalty { low = 0, medium = 1, high = 2 };

std::string_view to_string(SecurityLevel level);
std::string_view to_string(Loyalty loyalty);
SecurityLevel parse_security(std::string_view text);
Loyalty parse_loyalty(std::string_view text);

enum class DeviceClass { phone, server, rosbot_plus, robofleet, gpu_workstation };

std::string_view to_string(DeviceClass cls);
DeviceClass parse_device_class(std::string_view text);

enum class AttributeFamily { services, communication, computing, result_delivery };

inline constexpr std::array<AttributeFamily, 4> kAllFamilies = {
    AttributeFamily::services, AttributeFamily::communication, AttributeFamily::computing,
    AttributeFamily::result_delivery};

std::string_view to_string(AttributeFamily family);
AttributeFamily parse_family(std::string_view text);

enum class StageId { decomposition, service_availability, communication, computing, result_delivery };

inline constexpr std::array<StageId, 4> kEvaluationStages = {
    StageId::service_availability, StageId::communication, StageId::computing,
    StageId::result_delivery};

std::string_view to_string(StageId stage);
StageId parse_stage(std::string_view text);

/// Family inspected by an evaluation stage; nullopt for decomposition.
std::optional<AttributeFamily> family_of(StageId stage);
StageId stage_of(AttributeFamily family);

struct CommAttributes {
  double rate_mb_per_s = 0.0;
  SecurityLevel security = SecurityLevel::high;

  bool operator==(const CommAttributes&) const = default;
};

struct ComputeAttributes {
  double cpu_clock_ghz = 0.0;
  bool has_gpu = false;
  SecurityLevel security = SecurityLevel::low;

  bool operator==(const ComputeAttributes&) const = default;
};

struct ResultDeliveryAttribute {
  Loyalty loyalty = Loyalty::medium;

  bool operator==(const ResultDeliveryAttribute&) const = default;
};

/// Ordered, de-duplicated list of service names. Order is the order the
/// device advertised them in, which is also the order prompts render them.
using ServiceList = std::vector<std::string>;

using LogicalTime = std::uint64_t;

struct Device {
  DeviceId id;
  DeviceClass device_class = DeviceClass::phone;
  ServiceList services;
  CommAttributes comm;
  ComputeAttributes compute;
  ResultDeliveryAttribute delivery;
  std::map<AttributeFamily, LogicalTime> family_timestamps;

  bool operator==(const Device&) const = default;
};

/// Trim, collapse internal whitespace runs to one space, ASCII-lowercase.
std::string normalize_service(std::string_view name);

bool device_supports(const Device& device, std::string_view service);

/// Empty when the device is valid; otherwise one message per violation.
std::vector<std::string> validate_device(const Device& device);

struct Task {
  DeviceId owner;
  std::string text;
  std::string required_service;
  bool wants_fast_comm = true;
  bool wants_secure_comm = true;
  bool wants_fast_compute = true;
  bool wants_secure_compute = true;
  bool wants_honest_delivery = true;

  bool operator==(const Task&) const = default;
};

/// Throws std::invalid_argument when the required service is empty.
void validate_task(const Task& task);

/// "a" or "an" for a service name, by its first letter.
std::string_view article_for(std::string_view service);

/// Natural-language request whose wording encodes the task's flags.
std::string render_task_text(const Task& task);

/// Inverse of render_task_text; also reads phrasings like "quickly and
/// securely accomplish a 3D mapping task". Throws std::invalid_argument if
/// no service can be found.
Task parse_task_text(std::string_view text, DeviceId owner);

struct Subproblem {
  StageId stage;
  std::string question;

  bool operator==(const Subproblem&) const = default;
};

using SubproblemList = std::vector<Subproblem>;

/// Throws std::invalid_argument unless stages are evaluation stages in
/// strictly increasing canonical order.
void validate_subproblems(const SubproblemList& list);

/// Raised when a caller breaks an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace chaintrust
