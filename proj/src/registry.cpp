#include "chaintrust/registry.hpp"

#include <fmt/format.h>

namespace chaintrust {

AttributeFamily family_of(const FamilyPayload& payload) {
  static constexpr std::array<AttributeFamily, 4> kByIndex = {
      AttributeFamily::services, AttributeFamily::communication, AttributeFamily::computing,
      AttributeFamily::result_delivery};
  return kByIndex[payload.index()];
}

FamilyPayload payload_of(const Device& device, AttributeFamily family) {
  switch (family) {
    case AttributeFamily::services: return device.services;
    case AttributeFamily::communication: return device.comm;
    case AttributeFamily::computing: return device.compute;
    case AttributeFamily::result_delivery: return device.delivery;
  }
  throw std::logic_error("unreachable family");
}

DeviceSet FamilySnapshot::ids() const {
  DeviceSet out;
  for (const auto& [id, _] : entries) out.insert(id);
  return out;
}

DuplicateDevice::DuplicateDevice(DeviceId id)
    : RegistryError(fmt::format("device {} already registered", id.str())), id(id) {}

InvalidDevice::InvalidDevice(DeviceId id, std::vector<std::string> violations)
    : RegistryError(fmt::format("device {} invalid: {}", id.str(), fmt::join(violations, "; "))),
      id(id),
      violations(std::move(violations)) {}

UnknownDevice::UnknownDevice(DeviceId id)
    : RegistryError(fmt::format("device {} is not registered", id.str())), id(id) {}

void Registry::register_device(Device device) {
  if (devices_.contains(device.id)) throw DuplicateDevice(device.id);
  if (auto violations = validate_device(device); !violations.empty()) {
    throw InvalidDevice(device.id, std::move(violations));
  }
  for (auto family : kAllFamilies) device.family_timestamps[family] = clock_;
  const auto id = device.id;
  devices_.emplace(id, std::move(device));
  ++clock_;
}

void Registry::update_family(DeviceId id, AttributeFamily family, FamilyPayload values) {
  if (family_of(values) != family) {
    throw std::invalid_argument(fmt::format("payload holds {} values, not {}",
                                            to_string(family_of(values)), to_string(family)));
  }
  update_family(id, std::move(values));
}

void Registry::update_family(DeviceId id, FamilyPayload values) {
  auto it = devices_.find(id);
  if (it == devices_.end()) throw UnknownDevice(id);

  Device updated = it->second;
  const auto family = family_of(values);
  std::visit(
      [&](auto&& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ServiceList>) {
          updated.services = std::move(v);
        } else if constexpr (std::is_same_v<T, CommAttributes>) {
          updated.comm = v;
        } else if constexpr (std::is_same_v<T, ComputeAttributes>) {
          updated.compute = v;
        } else {
          updated.delivery = v;
        }
      },
      values);
  if (auto violations = validate_device(updated); !violations.empty()) {
    throw InvalidDevice(id, std::move(violations));
  }
  ++clock_;
  updated.family_timestamps[family] = clock_;
  it->second = std::move(updated);
}

FamilySnapshot Registry::collect(StageId stage, const DeviceSet& ids) {
  const auto family = family_of(stage);
  if (!family) throw ContractViolation("the decomposition stage has no attribute family to collect");
  for (const auto& id : ids) {
    if (!devices_.contains(id)) throw UnknownDevice(id);
  }

  ++clock_;
  FamilySnapshot snap{*family, clock_, {}};
  for (const auto& id : ids) {
    const Device& d = devices_.at(id);
    const auto stamp = d.family_timestamps.at(*family);
    const auto staleness = clock_ - stamp;
    if (max_staleness_ && staleness > *max_staleness_) {
      throw StaleData(fmt::format("{} data for {} is {} ticks old (limit {})", to_string(*family),
                                  id.str(), staleness, *max_staleness_));
    }
    snap.entries.emplace(id, SnapshotEntry{payload_of(d, *family), stamp, staleness});
  }
  log_.push_back({stage, *family, ids, clock_});
  return snap;
}

const Device& Registry::device(DeviceId id) const {
  auto it = devices_.find(id);
  if (it == devices_.end()) throw UnknownDevice(id);
  return it->second;
}

DeviceSet Registry::ids() const {
  DeviceSet out;
  for (const auto& [id, _] : devices_) out.insert(id);
  return out;
}

std::size_t Registry::collected_records() const {
  std::size_t total = 0;
  for (const auto& e : log_) total += e.devices.size();
  return total;
}

}  // namespace chaintrust
