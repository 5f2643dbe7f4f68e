#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "chaintrust/model.hpp"

namespace chaintrust {

/// Attribute values for exactly one family.
using FamilyPayload =
    std::variant<ServiceList, CommAttributes, ComputeAttributes, ResultDeliveryAttribute>;

AttributeFamily family_of(const FamilyPayload& payload);

/// Extracts the named family's values from a device.
FamilyPayload payload_of(const Device& device, AttributeFamily family);

struct SnapshotEntry {
  FamilyPayload values;
  LogicalTime value_timestamp = 0;
  LogicalTime staleness = 0;

  bool operator==(const SnapshotEntry&) const = default;
};

/// One family's values for a set of devices, as seen at `taken_at`.
struct FamilySnapshot {
  AttributeFamily family = AttributeFamily::services;
  LogicalTime taken_at = 0;
  std::map<DeviceId, SnapshotEntry> entries;

  DeviceSet ids() const;
  std::size_t record_count() const { return entries.size(); }
};

struct CollectionLogEntry {
  StageId stage;
  AttributeFamily family;
  DeviceSet devices;
  LogicalTime timestamp = 0;

  bool operator==(const CollectionLogEntry&) const = default;
};

class RegistryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DuplicateDevice : public RegistryError {
 public:
  explicit DuplicateDevice(DeviceId id);
  DeviceId id;
};

class InvalidDevice : public RegistryError {
 public:
  InvalidDevice(DeviceId id, std::vector<std::string> violations);
  DeviceId id;
  std::vector<std::string> violations;
};

class UnknownDevice : public RegistryError {
 public:
  explicit UnknownDevice(DeviceId id);
  DeviceId id;
};

class StaleData : public RegistryError {
 public:
  using RegistryError::RegistryError;
};

/// The central server's view of the fleet.
///
/// Every mutating call (register, update, collect) advances the logical
/// clock by one. Family timestamps are the clock value at which that family
/// was last written; they never exceed the clock and never decrease.
///
/// Not thread-safe. Copy the registry to give concurrent chain runs their
/// own view.
class Registry {
 public:
  Registry() = default;

  void register_device(Device device);

  /// Replaces one attribute family of a registered device. `family` must
  /// match the payload's alternative.
  void update_family(DeviceId id, AttributeFamily family, FamilyPayload values);
  void update_family(DeviceId id, FamilyPayload values);

  /// Returns the stage's attribute family for exactly `ids` and appends one
  /// collection log entry, even for an empty id set.
  FamilySnapshot collect(StageId stage, const DeviceSet& ids);

  const Device& device(DeviceId id) const;
  bool contains(DeviceId id) const { return devices_.contains(id); }
  const std::map<DeviceId, Device>& devices() const { return devices_; }
  DeviceSet ids() const;
  std::size_t size() const { return devices_.size(); }

  LogicalTime clock() const { return clock_; }
  const std::vector<CollectionLogEntry>& collection_log() const { return log_; }
  std::size_t collected_records() const;

  /// When set, collect() throws StaleData if any entry is older than this.
  void set_max_staleness(std::optional<LogicalTime> limit) { max_staleness_ = limit; }
  std::optional<LogicalTime> max_staleness() const { return max_staleness_; }

 private:
  std::map<DeviceId, Device> devices_;
  LogicalTime clock_ = 0;
  std::vector<CollectionLogEntry> log_;
  std::optional<LogicalTime> max_staleness_;
};

}  // namespace chaintrust
