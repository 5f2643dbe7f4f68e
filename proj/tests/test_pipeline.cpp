#include <doctest.h>

#include "support.hpp"

using namespace chaintrust;
using namespace testsupport;

namespace {

const DeviceSet kA2 = unite(range(2, 14), range(17, 20));
const DeviceSet kA3 = unite(ids({2, 3, 5}), range(8, 14));
const DeviceSet kA4 = range(8, 14);
const DeviceSet kA5 = ids({8, 10, 11});

DeviceSet survivors_of(const EvaluationTrace& t, StageId s) {
  const auto* r = t.last_record_of(s);
  REQUIRE(r != nullptr);
  return r->survivors;
}

}  // namespace

TEST_CASE("default policy reproduces the reference survivor sets") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  const auto t = run_chain(reference_task(), r, ev);
  CHECK(t.status.kind == ChainStatusKind::complete);
  CHECK(t.initial_candidates == range(2, 20));
  CHECK(survivors_of(t, StageId::service_availability) == kA2);
  CHECK(survivors_of(t, StageId::communication) == kA3);
  CHECK(survivors_of(t, StageId::computing) == kA4);
  CHECK(survivors_of(t, StageId::result_delivery) == kA5);
  CHECK(t.final_set == kA5);
  CHECK(t.final_set == oracle(fixture_fleet(), reference_task(), {}));
  CHECK(t.records.size() == 5);
}

TEST_CASE("progressive collection economy on the fixture") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  const auto t = run_chain(reference_task(), r, ev);
  REQUIRE(t.collection_log.size() == 4);
  CHECK(t.collection_log[0].devices.size() == 19);
  CHECK(t.collection_log[1].devices.size() == 17);
  CHECK(t.collection_log[2].devices.size() == 10);
  CHECK(t.collection_log[3].devices.size() == 7);
  CHECK(t.collected_records() == 19 + 17 + 10 + 7);
  CHECK(t.collected_records() < 19 * 4);
}

TEST_CASE("family isolation in the collection log") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  const auto t = run_chain(reference_task(), r, ev);
  for (const auto& e : t.collection_log) CHECK(family_of(e.stage) == e.family);
  for (const auto& rec : t.records) {
    if (!rec.snapshot) {
      CHECK(rec.stage == StageId::decomposition);
      continue;
    }
    CHECK(rec.snapshot->family == *family_of(rec.stage));
    CHECK(rec.snapshot->ids() == rec.input);
  }
}

TEST_CASE("the owner is never a candidate") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  auto task = reference_task();
  task.owner = DeviceId(10);
  const auto t = run_chain(task, r, ev);
  for (const auto& rec : t.records) CHECK_FALSE(rec.input.contains(DeviceId(10)));
  CHECK(t.final_set == ids({1, 8, 11}));
  CHECK(t.final_set == oracle(fixture_fleet(), task, {}));
}

TEST_CASE("stage 5 is skipped when honest delivery is not requested") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  auto task = reference_task();
  task.wants_honest_delivery = false;
  const auto t = run_chain(task, r, ev);
  CHECK(t.last_record_of(StageId::result_delivery) == nullptr);
  CHECK(t.final_set == kA4);
  CHECK(t.collection_log.size() == 3);
}

TEST_CASE("exhaustion short-circuits and stays lazy") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  auto task = reference_task();
  task.required_service = "video capture";
  const auto t = run_chain(task, r, ev);
  CHECK(t.status.str() == "exhausted_at(computing)");
  CHECK(t.final_set.empty());
  for (const auto& e : t.collection_log) CHECK(e.stage != StageId::result_delivery);

  task.required_service = "quantum annealing";
  auto r2 = fixture_registry();
  const auto t2 = run_chain(task, r2, ev);
  CHECK(t2.status.str() == "exhausted_at(service_availability)");
  CHECK(t2.collection_log.size() == 1);
}

TEST_CASE("empty registry exhausts at the first evaluation stage") {
  Registry r;
  RuleEvaluator ev;
  const auto t = run_chain(reference_task(), r, ev);
  CHECK(t.status.kind == ChainStatusKind::exhausted);
  CHECK(t.status.stage == StageId::service_availability);
  CHECK(t.final_set.empty());
}

TEST_CASE("scripted none at stage 2 exhausts the chain") {
  auto scripted = std::make_shared<ScriptedTransport>();
  scripted->push(render_decomposition_answer(reference_task(), derive_subproblems(reference_task())));
  scripted->push("None of the devices offers the 3D mapping service.");
  PromptEvaluator ev(scripted, ExemplarSet::load(data_dir() / "exemplars"));
  auto r = fixture_registry();
  const auto t = run_chain(reference_task(), r, ev);
  CHECK(t.status.str() == "exhausted_at(service_availability)");
  CHECK(t.final_set.empty());
  CHECK(scripted->call_count() == 2);
}

TEST_CASE("scripted ids outside the candidates are clipped") {
  auto scripted = std::make_shared<ScriptedTransport>();
  scripted->push(render_decomposition_answer(reference_task(), derive_subproblems(reference_task())));
  scripted->push("Devices a1, a2, a15, a16, a30 offer the 3D mapping service.");
  scripted->push("Devices a2, a15 can ensure it.");
  scripted->push("Devices a2 can ensure it.");
  scripted->push("Device a2 can ensure it.");
  PromptEvaluator ev(scripted, {});
  auto r = fixture_registry();
  const auto t = run_chain(reference_task(), r, ev);
  const auto* s2 = t.last_record_of(StageId::service_availability);
  CHECK(s2->survivors == ids({2, 15, 16}));
  CHECK(s2->dropped == ids({1, 30}));
  CHECK(t.final_set == ids({2}));
  CHECK(t.status.kind == ChainStatusKind::complete);
}

TEST_CASE("evaluator failure aborts with an empty final set") {
  auto scripted = std::make_shared<ScriptedTransport>();
  scripted->push(render_decomposition_answer(reference_task(), derive_subproblems(reference_task())));
  scripted->push("Devices a2, a3 offer the 3D mapping service.");
  scripted->push("I would rather not say.");
  PromptEvaluator ev(scripted, {});
  auto r = fixture_registry();
  const auto t = run_chain(reference_task(), r, ev);
  CHECK(t.status.str() == "evaluator_failed(communication)");
  CHECK(t.final_set.empty());
  CHECK_FALSE(t.status.message.empty());
}

TEST_CASE("decomposition can be left out of the spec") {
  ChainSpec spec;
  spec.stages = {StageId::service_availability, StageId::communication, StageId::computing,
                 StageId::result_delivery};
  auto r = fixture_registry();
  RuleEvaluator ev;
  const auto t = run_chain(reference_task(), r, ev, spec);
  CHECK(t.final_set == kA5);
  CHECK(t.last_record_of(StageId::decomposition) == nullptr);
  CHECK(t.subproblems.size() == 4);
}

TEST_CASE("chain spec validation") {
  ChainSpec s;
  CHECK_NOTHROW(s.validate());
  s.stages = {StageId::communication, StageId::decomposition};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.stages = {StageId::communication, StageId::communication};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = {};
  s.repeats[StageId::computing] = -1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("in-run repeats re-execute a stage on its own survivors") {
  ChainSpec spec;
  spec.repeats[StageId::communication] = 2;
  auto r = fixture_registry();
  RuleEvaluator ev;
  const auto t = run_chain(reference_task(), r, ev, spec);
  int comm_runs = 0;
  for (const auto& rec : t.records) {
    if (rec.stage == StageId::communication) {
      CHECK(rec.repeat == comm_runs);
      ++comm_runs;
    }
  }
  CHECK(comm_runs == 3);
  CHECK(t.final_set == kA5);
  CHECK(t.last_record_of(StageId::communication)->input == kA3);
}

TEST_CASE("re-evaluation after a loyalty change") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  const auto t = run_chain(reference_task(), r, ev);
  r.update_family(DeviceId(10), ResultDeliveryAttribute{Loyalty::low});
  const auto t2 = reevaluate_stage(t, StageId::result_delivery, r, ev);
  CHECK(t2.final_set == ids({8, 11}));
  CHECK(t2.reevaluations.at(StageId::result_delivery) == 1);
  for (std::size_t i = 0; i + 1 < t.records.size(); ++i) {
    CHECK(t2.records[i].survivors == t.records[i].survivors);
    CHECK(t2.records[i].prompt == t.records[i].prompt);
  }
  const auto t3 = reevaluate_stage(t2, StageId::result_delivery, r, ev);
  CHECK(t3.reevaluations.at(StageId::result_delivery) == 2);
}

TEST_CASE("re-evaluation without updates is deterministic") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  const auto t = run_chain(reference_task(), r, ev);
  const auto t2 = reevaluate_stage(t, StageId::service_availability, r, ev);
  CHECK(t2.final_set == t.final_set);
  CHECK(t2.status == t.status);
}

TEST_CASE("re-evaluating communication after a rate drop") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  auto task = reference_task();
  task.wants_secure_compute = false;
  task.wants_fast_compute = false;
  const auto t = run_chain(task, r, ev);
  CHECK(t.last_record_of(StageId::computing)->input.contains(DeviceId(2)));
  r.update_family(DeviceId(2), CommAttributes{1.0, SecurityLevel::high});
  const auto t2 = reevaluate_stage(t, StageId::communication, r, ev);
  CHECK_FALSE(t2.last_record_of(StageId::communication)->survivors.contains(DeviceId(2)));
  CHECK_FALSE(t2.last_record_of(StageId::computing)->input.contains(DeviceId(2)));
  CHECK_FALSE(t2.last_record_of(StageId::result_delivery)->input.contains(DeviceId(2)));
  CHECK(t2.last_record_of(StageId::communication)->input == t.last_record_of(StageId::communication)->input);
}

TEST_CASE("re-evaluating a stage the trace never ran") {
  auto r = fixture_registry();
  RuleEvaluator ev;
  auto task = reference_task();
  task.wants_honest_delivery = false;
  const auto t = run_chain(task, r, ev);
  CHECK_THROWS_AS(reevaluate_stage(t, StageId::result_delivery, r, ev), std::invalid_argument);
}
