#include <doctest.h>

#include "support.hpp"

using namespace chaintrust;
using namespace testsupport;

TEST_CASE("jaccard") {
  CHECK(jaccard({}, {}) == 1.0);
  CHECK(jaccard(ids({1}), {}) == 0.0);
  CHECK(jaccard(ids({1, 2}), ids({2, 3})) == doctest::Approx(1.0 / 3.0));
  CHECK(jaccard(ids({4, 5}), ids({5, 4})) == 1.0);
}

TEST_CASE("ground truth on the fixture") {
  const auto r = fixture_registry();
  CHECK(ground_truth(reference_task(), r, {}) == ids({8, 10, 11}));
  auto t = reference_task();
  t.wants_honest_delivery = false;
  CHECK(ground_truth(t, r, {}) == range(8, 14));
  t.required_service = "AI MODEL   training";
  CHECK(ground_truth(t, r, {}) == oracle(fixture_fleet(), t, {}));
  CHECK(ground_truth(t, r, {}).contains(DeviceId(15)));
}

TEST_CASE("task generation is seeded and validated") {
  TaskGenerator g;
  g.services = default_service_vocabulary();
  g.flags = {0.5, 0.5, 0.5, 0.5, 0.5};
  const auto a = generate_tasks(g, 50);
  const auto b = generate_tasks(g, 50);
  CHECK(a == b);
  g.seed = 43;
  CHECK(generate_tasks(g, 50) != a);
  for (const auto& t : a) {
    CHECK(parse_task_text(t.text, t.owner) == t);
  }
  CHECK_THROWS_AS(generate_tasks(g, 0), std::invalid_argument);
  g.services.clear();
  CHECK_THROWS_AS(generate_tasks(g, 3), std::invalid_argument);
}

TEST_CASE("three modes give a three-row table with a failures column") {
  const auto r = fixture_registry();
  TaskGenerator g;
  g.services = default_service_vocabulary();
  const auto tasks = generate_tasks(g, 30);
  RuleEvaluator ev;
  std::vector<BenchmarkReport> reports;
  for (auto m : kAllModes) reports.push_back(run_benchmark(tasks, r, ev, {}, m));
  const auto table = render_table(reports);
  std::istringstream in(table);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].find("failures") != std::string::npos);
  for (const auto& rep : reports) {
    CHECK(rep.accuracy == 1.0);
    CHECK(rep.mean_jaccard == 1.0);
  }
}

TEST_CASE("failed tasks count as misses") {
  const auto r = fixture_registry();
  auto scripted = std::make_shared<ScriptedTransport>();
  scripted->push("no idea");
  PromptEvaluator ev(scripted, {});
  const auto rep = run_benchmark({reference_task()}, r, ev, {}, BenchmarkMode::standard_single_prompt);
  CHECK(rep.failures == 1);
  CHECK(rep.accuracy == 0.0);
  CHECK(rep.tasks.at(0).jaccard == 0.0);
  CHECK(rep.tasks.at(0).failed);
}

TEST_CASE("replaying the shipped transcript scores 1.0 on task T") {
  const auto r = fixture_registry();
  PromptEvaluator ev(record_replay(TranscriptMode::replay, data_dir() / "transcripts" / "reference_trace.jsonl"),
                     ExemplarSet::load(data_dir() / "exemplars"), {}, "scripted");
  const auto rep = run_benchmark({reference_task()}, r, ev, {}, BenchmarkMode::chain_of_trust);
  CHECK(rep.accuracy == 1.0);
  CHECK(rep.tasks.at(0).predicted == ids({8, 10, 11}));
}

TEST_CASE("metric sanity") {
  const auto r = fixture_registry();
  TaskGenerator g;
  g.services = default_service_vocabulary();
  g.flags = {0.5, 0.5, 0.5, 0.5, 0.5};
  NoisyRuleEvaluator ev({}, 0.3, 9, [&](const Task& t) { return ground_truth(t, r, {}); });
  const auto rep = run_benchmark(generate_tasks(g, 200), r, ev, {}, BenchmarkMode::chain_of_trust);
  for (const auto& t : rep.tasks) {
    if (t.exact_match) CHECK(t.jaccard == 1.0);
    if (t.predicted.empty() && t.truth.empty()) CHECK(t.exact_match);
    CHECK(t.jaccard >= 0.0);
    CHECK(t.jaccard <= 1.0);
  }
}

TEST_CASE("reports are identical across thread counts and reruns") {
  const auto r = fixture_registry();
  TaskGenerator g;
  g.services = default_service_vocabulary();
  g.flags = {0.7, 0.7, 0.7, 0.7, 0.7};
  const auto tasks = generate_tasks(g, 120);
  NoisyRuleEvaluator ev({}, 0.2, 4, [&](const Task& t) { return ground_truth(t, r, {}); });
  auto strip = [](nlohmann::json j) {
    j.erase("elapsed_seconds");
    return j.dump();
  };
  for (auto m : kAllModes) {
    BenchmarkOptions one, many;
    many.threads = 6;
    const auto a = strip(report_to_json(run_benchmark(tasks, r, ev, {}, m, one)));
    const auto b = strip(report_to_json(run_benchmark(tasks, r, ev, {}, m, many)));
    const auto c = strip(report_to_json(run_benchmark(tasks, r, ev, {}, m, one)));
    CHECK(a == b);
    CHECK(a == c);
  }
}

TEST_CASE("noisy evaluator is reproducible and keyed by nonce") {
  auto r = fixture_registry();
  NoisyRuleEvaluator ev({}, 0.5, 1, [&](const Task& t) { return ground_truth(t, r, {}); });
  std::set<std::string> finals;
  for (std::uint64_t n = 0; n < 40; ++n) {
    auto r1 = fixture_registry();
    auto r2 = fixture_registry();
    const auto a = run_chain(reference_task(), r1, ev, {}, n);
    const auto b = run_chain(reference_task(), r2, ev, {}, n);
    CHECK(a.final_set == b.final_set);
    finals.insert(render_set(a.final_set));
  }
  CHECK(finals.size() > 1);
}

TEST_CASE("random instance generators") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto fleet = random_fleet(rng);
    CHECK(!fleet.empty());
    CHECK(validate_fleet(fleet).empty());
    CHECK_NOTHROW(random_policy(rng).validate());
    CHECK_NOTHROW(validate_task(random_task(rng, default_service_vocabulary())));
  }
}
