#include <doctest.h>

#include "support.hpp"

using namespace chaintrust;
using namespace testsupport;

TEST_CASE("register rejects duplicates and invalid devices") {
  Registry r;
  Device d;
  d.id = DeviceId(3);
  d.services = {"video capture"};
  r.register_device(d);
  CHECK(r.size() == 1);
  CHECK_THROWS_AS(r.register_device(d), DuplicateDevice);

  Device bad = d;
  bad.id = DeviceId(4);
  bad.comm.rate_mb_per_s = -1;
  try {
    r.register_device(bad);
    FAIL("expected InvalidDevice");
  } catch (const InvalidDevice& e) {
    CHECK(std::string(e.what()).find("negative rate") != std::string::npos);
  }
  CHECK(r.size() == 1);
}

TEST_CASE("register stamps every family") {
  Registry r;
  Device d;
  d.id = DeviceId(2);
  d.services = {"3D mapping"};
  r.register_device(d);
  const auto& stored = r.device(DeviceId(2));
  CHECK(stored.family_timestamps.size() == kAllFamilies.size());
  for (auto f : kAllFamilies) CHECK(stored.family_timestamps.at(f) <= r.clock());
}

TEST_CASE("update_family") {
  auto r = fixture_registry();
  const auto before = r.device(DeviceId(10)).family_timestamps;
  r.update_family(DeviceId(10), ResultDeliveryAttribute{Loyalty::low});
  const auto& after = r.device(DeviceId(10));
  CHECK(after.delivery.loyalty == Loyalty::low);
  CHECK(after.family_timestamps.at(AttributeFamily::result_delivery) >
        before.at(AttributeFamily::result_delivery));
  CHECK(after.family_timestamps.at(AttributeFamily::communication) == before.at(AttributeFamily::communication));

  CHECK_THROWS_AS(r.update_family(DeviceId(99), ResultDeliveryAttribute{}), UnknownDevice);
  CHECK_THROWS_AS(r.update_family(DeviceId(10), AttributeFamily::communication, ResultDeliveryAttribute{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(r.update_family(DeviceId(10), CommAttributes{-3.0, SecurityLevel::high}), InvalidDevice);
  CHECK(r.device(DeviceId(10)).comm.rate_mb_per_s == doctest::Approx(31.0));
}

TEST_CASE("collect returns only the stage's family for exactly the ids") {
  auto r = fixture_registry();
  const auto candidates = range(2, 20);
  const auto snap = r.collect(StageId::communication, candidates);
  CHECK(snap.family == AttributeFamily::communication);
  CHECK(snap.ids() == candidates);
  CHECK(snap.record_count() == 19);
  for (const auto& [id, e] : snap.entries) {
    CHECK(std::holds_alternative<CommAttributes>(e.values));
    CHECK(e.staleness >= 1);
    CHECK(e.value_timestamp + e.staleness == snap.taken_at);
  }
  CHECK(std::get<CommAttributes>(snap.entries.at(DeviceId(2)).values).rate_mb_per_s == doctest::Approx(40.0));
  REQUIRE(r.collection_log().size() == 1);
  CHECK(r.collection_log()[0].devices == candidates);
}

TEST_CASE("collect edge cases") {
  auto r = fixture_registry();
  const auto empty = r.collect(StageId::service_availability, {});
  CHECK(empty.entries.empty());
  CHECK(r.collection_log().size() == 1);
  CHECK_THROWS_AS(r.collect(StageId::decomposition, range(2, 3)), ContractViolation);
  CHECK_THROWS_AS(r.collect(StageId::computing, ids({2, 77})), UnknownDevice);
  CHECK(r.collection_log().size() == 1);
}

TEST_CASE("snapshot determinism") {
  auto r = fixture_registry();
  auto a = r.collect(StageId::computing, range(2, 20));
  auto b = r.collect(StageId::computing, range(2, 20));
  CHECK(a.taken_at != b.taken_at);
  for (const auto& [id, e] : a.entries) {
    CHECK(e.values == b.entries.at(id).values);
    CHECK(e.value_timestamp == b.entries.at(id).value_timestamp);
  }
}

TEST_CASE("max staleness is off by default and enforced when set") {
  auto r = fixture_registry();
  for (int i = 0; i < 50; ++i) (void)r.collect(StageId::service_availability, ids({2}));
  CHECK_NOTHROW(r.collect(StageId::communication, ids({3})));
  r.set_max_staleness(5);
  CHECK_THROWS_AS(r.collect(StageId::communication, ids({3})), StaleData);
  r.update_family(DeviceId(3), CommAttributes{38, SecurityLevel::high});
  CHECK_NOTHROW(r.collect(StageId::communication, ids({3})));
}

TEST_CASE("timestamps stay monotone and bounded by the clock under random updates") {
  std::mt19937_64 rng(11);
  auto fleet = random_fleet(rng, {12, 12});
  auto r = registry_of(fleet);
  std::map<std::pair<DeviceId, AttributeFamily>, LogicalTime> last;
  for (const auto& [id, d] : r.devices()) {
    for (const auto& [f, t] : d.family_timestamps) last[{id, f}] = t;
  }
  std::uniform_int_distribution<int> pick_dev(1, 12), pick_fam(0, 3), pick_rate(0, 100);
  for (int i = 0; i < 1000; ++i) {
    const DeviceId id(static_cast<std::uint32_t>(pick_dev(rng)));
    const auto fam = kAllFamilies[static_cast<std::size_t>(pick_fam(rng))];
    switch (fam) {
      case AttributeFamily::services: r.update_family(id, ServiceList{"edge caching"}); break;
      case AttributeFamily::communication:
        r.update_family(id, CommAttributes{static_cast<double>(pick_rate(rng)), SecurityLevel::medium});
        break;
      case AttributeFamily::computing: r.update_family(id, ComputeAttributes{1.0, false, SecurityLevel::high}); break;
      case AttributeFamily::result_delivery: r.update_family(id, ResultDeliveryAttribute{Loyalty::high}); break;
    }
    const auto& d = r.device(id);
    const auto t = d.family_timestamps.at(fam);
    CHECK(t > last[{id, fam}]);
    CHECK(t <= r.clock());
    last[{id, fam}] = t;
    if (i % 97 == 0) (void)r.collect(StageId::computing, r.ids());
  }
  for (const auto& [id, d] : r.devices()) {
    for (const auto& [f, t] : d.family_timestamps) CHECK(t <= r.clock());
  }
}
