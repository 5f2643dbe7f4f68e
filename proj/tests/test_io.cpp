#include <doctest.h>

#include "support.hpp"

using namespace chaintrust;
using namespace testsupport;
using nlohmann::json;

namespace {

json minimal_fleet() {
  return json::parse(R"({"devices": [
    {"id": "a1", "class": "phone", "services": ["3D mapping"],
     "comm": {"rate_mb_per_s": 50, "security": "high"},
     "compute": {"cpu_clock_ghz": 2.91, "has_gpu": false, "security": "high"},
     "delivery": {"loyalty": "high"}},
    {"id": "a2", "class": "rosbot_plus", "services": ["3D mapping"],
     "comm": {"rate_mb_per_s": 40, "security": "high"},
     "compute": {"cpu_clock_mhz": 168, "has_gpu": false, "security": "low"},
     "delivery": {"loyalty": "medium"}}]})");
}

std::string parse_error(const std::string& text) {
  try {
    (void)parse_fleet(text);
  } catch (const FleetParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("the shipped fleet has twenty valid devices") {
  const auto fleet = fixture_fleet();
  CHECK(fleet.size() == 20);
  CHECK(validate_fleet(fleet).empty());
  CHECK(fleet.at(1).compute.cpu_clock_ghz == doctest::Approx(0.168));
  for (const auto& d : fleet) CHECK(d.comm.security == SecurityLevel::high);
}

TEST_CASE("MHz clocks are normalized") {
  const auto fleet = parse_fleet(minimal_fleet().dump());
  CHECK(fleet.at(1).compute.cpu_clock_ghz == doctest::Approx(0.168));
  CHECK(format_clock(fleet.at(1).compute.cpu_clock_ghz) == "CPU 168 MHz");
}

TEST_CASE("fleet parse errors name the place") {
  CHECK(parse_error("{\n\"devices\": [\n,]}").find("line") != std::string::npos);
  auto j = minimal_fleet();
  j["devices"][1]["comm"]["rate_mb_per_s"] = "fast";
  CHECK(parse_error(j.dump()).find("devices[1].comm.rate_mb_per_s") != std::string::npos);
  j = minimal_fleet();
  j["devices"][0]["colour"] = "red";
  CHECK(parse_error(j.dump()).find("colour") != std::string::npos);
  j = minimal_fleet();
  j["devices"][0]["compute"]["cpu_clock_mhz"] = 2910;
  CHECK_FALSE(parse_error(j.dump()).empty());
  j = minimal_fleet();
  j["devices"][0]["compute"].erase("cpu_clock_ghz");
  CHECK_FALSE(parse_error(j.dump()).empty());
  j = minimal_fleet();
  j["devices"][0]["id"] = "device-one";
  CHECK(parse_error(j.dump()).find("devices[0].id") != std::string::npos);
  j = minimal_fleet();
  j["devices"][0]["comm"]["security"] = "ultra";
  CHECK_FALSE(parse_error(j.dump()).empty());
  CHECK_THROWS_AS(load_fleet("/nonexistent/fleet.json"), FleetParseError);
}

TEST_CASE("fleet validation lists duplicates and violations") {
  auto j = minimal_fleet();
  j["devices"][1]["id"] = "a1";
  auto problems = validate_fleet(parse_fleet(j.dump()));
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("a1") != std::string::npos);

  j = minimal_fleet();
  j["devices"][1]["comm"]["rate_mb_per_s"] = -1;
  problems = validate_fleet(parse_fleet(j.dump()));
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("negative rate") != std::string::npos);
  CHECK_THROWS(registry_from_fleet(parse_fleet(j.dump())));
}

TEST_CASE("fleet round trip") {
  const auto fleet = fixture_fleet();
  const auto back = parse_fleet(fleet_to_json(fleet_of(registry_from_fleet(fleet))).dump());
  REQUIRE(back.size() == fleet.size());
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    CHECK(back[i].id == fleet[i].id);
    CHECK(back[i].device_class == fleet[i].device_class);
    CHECK(back[i].services == fleet[i].services);
    CHECK(back[i].comm == fleet[i].comm);
    CHECK(back[i].compute == fleet[i].compute);
    CHECK(back[i].delivery == fleet[i].delivery);
  }
}

TEST_CASE("random fleets round trip") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const auto fleet = random_fleet(rng);
    const auto back = parse_fleet(fleet_to_json(fleet).dump());
    REQUIRE(back.size() == fleet.size());
    for (std::size_t k = 0; k < fleet.size(); ++k) {
      CHECK(back[k].services == fleet[k].services);
      CHECK(back[k].comm == fleet[k].comm);
      CHECK(back[k].compute == fleet[k].compute);
      CHECK(back[k].delivery == fleet[k].delivery);
    }
  }
}

TEST_CASE("traces verify offline against the fleet") {
  auto r = fixture_registry();
  RulePolicy policy;
  RuleEvaluator ev(policy);
  const auto trace = run_chain(reference_task(), r, ev);
  const auto doc = trace_to_json(trace);
  CHECK(verify_trace(doc, fixture_fleet(), &policy).empty());

  auto tampered = doc;
  for (auto& rec : tampered["records"]) {
    if (rec["stage"] == "result_delivery") rec["survivors"].push_back("a9");
  }
  CHECK_FALSE(verify_trace(tampered, fixture_fleet(), &policy).empty());

  tampered = doc;
  for (auto& rec : tampered["records"]) {
    if (rec["stage"] == "communication") rec["input"].push_back("a1");
  }
  CHECK_FALSE(verify_trace(tampered, fixture_fleet()).empty());

  auto fleet = fixture_fleet();
  fleet[1].comm.rate_mb_per_s = 39;
  CHECK_FALSE(verify_trace(doc, fleet).empty());
}

TEST_CASE("random traces verify offline") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 200; ++i) {
    const auto fleet = random_fleet(rng, {2, 16});
    auto r = registry_of(fleet);
    const auto policy = random_policy(rng);
    RuleEvaluator ev(policy);
    const auto trace = run_chain(random_task(rng, default_service_vocabulary()), r, ev);
    const auto doc = json::parse(trace_to_json(trace).dump());
    CHECK(verify_trace(doc, fleet, &policy).empty());
  }
}

TEST_CASE("report documents") {
  const auto r = fixture_registry();
  RuleEvaluator ev;
  const auto rep = run_benchmark({reference_task()}, r, ev, {}, BenchmarkMode::chain_of_trust);
  const auto j = report_to_json(rep);
  CHECK(j["accuracy"] == 1.0);
  CHECK(j["mode"] == "chain_of_trust");
  CHECK(j["tasks"].size() == 1);
  const auto cmp = comparison_to_json({rep});
  CHECK(cmp["rows"].size() == 1);
  CHECK(cmp["table"].is_string());
}
