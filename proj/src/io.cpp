#include "chaintrust/io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace chaintrust {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& path, std::string_view what) {
  throw FleetParseError(fmt::format("{}: {}", path, what));
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      field_error(path, fmt::format("unknown field '{}'", key));
    }
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) field_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) field_error(path, fmt::format("missing field '{}'", key));
  return *it;
}

std::string require_string(const json& obj, const std::string& path, const char* key) {
  const auto& v = require(obj, path, key);
  if (!v.is_string()) field_error(path + "." + key, "expected a string");
  return v.get<std::string>();
}

double require_number(const json& obj, const std::string& path, const char* key) {
  const auto& v = require(obj, path, key);
  if (!v.is_number()) field_error(path + "." + key, "expected a number");
  return v.get<double>();
}

bool require_bool(const json& obj, const std::string& path, const char* key) {
  const auto& v = require(obj, path, key);
  if (!v.is_boolean()) field_error(path + "." + key, "expected true or false");
  return v.get<bool>();
}

template <typename F>
auto enum_field(const json& obj, const std::string& path, const char* key, F parse) {
  const auto text = require_string(obj, path, key);
  try {
    return parse(text);
  } catch (const std::invalid_argument& e) {
    field_error(path + "." + key, e.what());
  }
}

Device parse_device(const json& d, const std::string& path) {
  if (!d.is_object()) field_error(path, "expected an object");
  reject_unknown(d, path, {"id", "class", "services", "comm", "compute", "delivery", "note"});

  Device device;
  try {
    device.id = DeviceId::parse(require_string(d, path, "id"));
  } catch (const std::invalid_argument& e) {
    field_error(path + ".id", e.what());
  }
  device.device_class = enum_field(d, path, "class", parse_device_class);

  const auto& services = require(d, path, "services");
  if (!services.is_array()) field_error(path + ".services", "expected an array of strings");
  for (const auto& s : services) {
    if (!s.is_string()) field_error(path + ".services", "expected an array of strings");
    device.services.push_back(s.get<std::string>());
  }

  const auto comm_path = path + ".comm";
  const auto& comm = require(d, path, "comm");
  reject_unknown(comm, comm_path, {"rate_mb_per_s", "security"});
  device.comm.rate_mb_per_s = require_number(comm, comm_path, "rate_mb_per_s");
  device.comm.security = enum_field(comm, comm_path, "security", parse_security);

  const auto compute_path = path + ".compute";
  const auto& compute = require(d, path, "compute");
  reject_unknown(compute, compute_path, {"cpu_clock_ghz", "cpu_clock_mhz", "has_gpu", "security"});
  const bool ghz = compute.contains("cpu_clock_ghz");
  const bool mhz = compute.contains("cpu_clock_mhz");
  if (ghz == mhz) field_error(compute_path, "exactly one of cpu_clock_ghz and cpu_clock_mhz is required");
  device.compute.cpu_clock_ghz = ghz ? require_number(compute, compute_path, "cpu_clock_ghz")
                                     : require_number(compute, compute_path, "cpu_clock_mhz") / 1000.0;
  device.compute.has_gpu = compute.contains("has_gpu") ? require_bool(compute, compute_path, "has_gpu") : false;
  device.compute.security = enum_field(compute, compute_path, "security", parse_security);

  const auto delivery_path = path + ".delivery";
  const auto& delivery = require(d, path, "delivery");
  reject_unknown(delivery, delivery_path, {"loyalty"});
  device.delivery.loyalty = enum_field(delivery, delivery_path, "loyalty", parse_loyalty);
  return device;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  const auto end = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
}

json ids_to_json(const DeviceSet& ids) {
  json out = json::array();
  for (const auto& id : ids) out.push_back(id.str());
  return out;
}

DeviceSet ids_from_json(const json& array) {
  DeviceSet out;
  for (const auto& v : array) out.insert(DeviceId::parse(v.get<std::string>()));
  return out;
}

json comm_to_json(const CommAttributes& c) {
  return {{"rate_mb_per_s", c.rate_mb_per_s}, {"security", to_string(c.security)}};
}

json compute_to_json(const ComputeAttributes& c) {
  return {{"cpu_clock_ghz", c.cpu_clock_ghz}, {"has_gpu", c.has_gpu}, {"security", to_string(c.security)}};
}

json payload_to_json(const FamilyPayload& payload) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ServiceList>) {
          return v;
        } else if constexpr (std::is_same_v<T, CommAttributes>) {
          return comm_to_json(v);
        } else if constexpr (std::is_same_v<T, ComputeAttributes>) {
          return compute_to_json(v);
        } else {
          return {{"loyalty", to_string(v.loyalty)}};
        }
      },
      payload);
}

}  // namespace

std::vector<Device> parse_fleet(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FleetParseError(fmt::format("line {}: {}", line_of(text, e.byte), e.what()));
  }
  if (!doc.is_object()) field_error("$", "expected an object");
  reject_unknown(doc, "$", {"description", "devices"});
  const auto& devices = require(doc, "$", "devices");
  if (!devices.is_array()) field_error("devices", "expected an array");

  std::vector<Device> out;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    out.push_back(parse_device(devices[i], fmt::format("devices[{}]", i)));
  }
  return out;
}

std::vector<Device> load_fleet(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FleetParseError(fmt::format("cannot open fleet file {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_fleet(buffer.str());
  } catch (const FleetParseError& e) {
    throw FleetParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<std::string> validate_fleet(const std::vector<Device>& devices) {
  std::vector<std::string> out;
  std::set<DeviceId> seen;
  for (const auto& d : devices) {
    if (!seen.insert(d.id).second) out.push_back(fmt::format("{}: duplicate id", d.id.str()));
    for (const auto& v : validate_device(d)) out.push_back(fmt::format("{}: {}", d.id.str(), v));
  }
  return out;
}

Registry registry_from_fleet(const std::vector<Device>& devices) {
  if (auto problems = validate_fleet(devices); !problems.empty()) {
    throw FleetParseError(fmt::format("invalid fleet: {}", fmt::join(problems, "; ")));
  }
  return registry_of(devices);
}

json fleet_to_json(const std::vector<Device>& devices) {
  json list = json::array();
  for (const auto& d : devices) {
    list.push_back({{"id", d.id.str()},
                    {"class", to_string(d.device_class)},
                    {"services", d.services},
                    {"comm", comm_to_json(d.comm)},
                    {"compute", compute_to_json(d.compute)},
                    {"delivery", {{"loyalty", to_string(d.delivery.loyalty)}}}});
  }
  return {{"devices", list}};
}

std::vector<Device> fleet_of(const Registry& registry) {
  std::vector<Device> out;
  for (const auto& [_, d] : registry.devices()) out.push_back(d);
  return out;
}

json task_to_json(const Task& task) {
  return {{"owner", task.owner.str()},
          {"text", task.text},
          {"required_service", task.required_service},
          {"wants_fast_comm", task.wants_fast_comm},
          {"wants_secure_comm", task.wants_secure_comm},
          {"wants_fast_compute", task.wants_fast_compute},
          {"wants_secure_compute", task.wants_secure_compute},
          {"wants_honest_delivery", task.wants_honest_delivery}};
}

json snapshot_to_json(const FamilySnapshot& snapshot) {
  json entries = json::object();
  for (const auto& [id, e] : snapshot.entries) {
    entries[id.str()] = {{"values", payload_to_json(e.values)},
                         {"value_timestamp", e.value_timestamp},
                         {"staleness", e.staleness}};
  }
  return {{"family", to_string(snapshot.family)}, {"taken_at", snapshot.taken_at}, {"entries", entries}};
}

json trace_to_json(const EvaluationTrace& trace) {
  json stages = json::array();
  for (auto s : trace.spec.stages) stages.push_back(to_string(s));
  json subproblems = json::array();
  for (const auto& sp : trace.subproblems) {
    subproblems.push_back({{"stage", to_string(sp.stage)}, {"question", sp.question}});
  }
  json records = json::array();
  for (const auto& r : trace.records) {
    records.push_back({{"stage", to_string(r.stage)},
                       {"repeat", r.repeat},
                       {"input", ids_to_json(r.input)},
                       {"snapshot", r.snapshot ? snapshot_to_json(*r.snapshot) : json()},
                       {"question", r.question},
                       {"prompt", r.prompt},
                       {"raw_output", r.raw_output},
                       {"survivors", ids_to_json(r.survivors)},
                       {"dropped", ids_to_json(r.dropped)}});
  }
  json log = json::array();
  for (const auto& e : trace.collection_log) {
    log.push_back({{"stage", to_string(e.stage)},
                   {"family", to_string(e.family)},
                   {"devices", ids_to_json(e.devices)},
                   {"timestamp", e.timestamp}});
  }
  json reevaluations = json::object();
  for (const auto& [stage, n] : trace.reevaluations) reevaluations[std::string(to_string(stage))] = n;

  return {{"task", task_to_json(trace.task)},
          {"evaluator", trace.evaluator},
          {"chain", stages},
          {"subproblems", subproblems},
          {"initial_candidates", ids_to_json(trace.initial_candidates)},
          {"records", records},
          {"collection_log", log},
          {"collected_records", trace.collected_records()},
          {"reevaluations", reevaluations},
          {"final", ids_to_json(trace.final_set)},
          {"status", trace.status.str()},
          {"status_message", trace.status.message}};
}

std::vector<std::string> verify_trace(const json& trace, const std::vector<Device>& fleet, const RulePolicy* policy) {
  std::vector<std::string> problems;
  std::map<DeviceId, Device> by_id;
  for (const auto& d : fleet) by_id.emplace(d.id, d);

  const auto& t = trace.at("task");
  Task task;
  task.owner = DeviceId::parse(t.at("owner").get<std::string>());
  task.text = t.at("text");
  task.required_service = t.at("required_service");
  task.wants_fast_comm = t.at("wants_fast_comm");
  task.wants_secure_comm = t.at("wants_secure_comm");
  task.wants_fast_compute = t.at("wants_fast_compute");
  task.wants_secure_compute = t.at("wants_secure_compute");
  task.wants_honest_delivery = t.at("wants_honest_delivery");
  const bool rule_trace = trace.value("evaluator", "") == "rule";

  auto previous = ids_from_json(trace.at("initial_candidates"));
  if (previous.contains(task.owner)) problems.push_back("owner is among the initial candidates");

  for (const auto& r : trace.at("records")) {
    const auto stage = parse_stage(r.at("stage").get<std::string>());
    const auto input = ids_from_json(r.at("input"));
    const auto survivors = ids_from_json(r.at("survivors"));
    const auto label = fmt::format("{}#{}", to_string(stage), r.value("repeat", 0));
    if (!std::includes(previous.begin(), previous.end(), input.begin(), input.end())) {
      problems.push_back(label + ": input is not within the previous survivors");
    }
    if (!std::includes(input.begin(), input.end(), survivors.begin(), survivors.end())) {
      problems.push_back(label + ": survivors are not within the input");
    }
    if (input.contains(task.owner)) problems.push_back(label + ": owner among the candidates");

    if (stage != StageId::decomposition && !r.at("snapshot").is_null()) {
      const auto& snap = r.at("snapshot");
      const auto family = parse_family(snap.at("family").get<std::string>());
      if (family_of(stage) != family) problems.push_back(label + ": snapshot holds the wrong family");
      FamilySnapshot rebuilt{family, snap.at("taken_at").get<LogicalTime>(), {}};
      DeviceSet covered;
      for (const auto& [key, entry] : snap.at("entries").items()) {
        const auto id = DeviceId::parse(key);
        covered.insert(id);
        auto it = by_id.find(id);
        if (it == by_id.end()) {
          problems.push_back(fmt::format("{}: {} is not in the fleet", label, key));
          continue;
        }
        const auto expected = payload_of(it->second, family);
        if (payload_to_json(expected) != entry.at("values")) {
          problems.push_back(fmt::format("{}: {} values differ from the fleet", label, key));
        }
        rebuilt.entries.emplace(id, SnapshotEntry{expected, 0, 0});
      }
      if (covered != input) problems.push_back(label + ": snapshot does not cover exactly the input");
      if (policy != nullptr && rule_trace && rule_judge(*policy, stage, task, rebuilt) != survivors) {
        problems.push_back(label + ": survivors disagree with the rule predicate");
      }
    }
    previous = survivors;
  }
  return problems;
}

json report_to_json(const BenchmarkReport& report) {
  json tasks = json::array();
  for (std::size_t i = 0; i < report.tasks.size(); ++i) {
    const auto& r = report.tasks[i];
    tasks.push_back({{"index", i},
                     {"task", task_to_json(r.task)},
                     {"predicted", ids_to_json(r.predicted)},
                     {"truth", ids_to_json(r.truth)},
                     {"exact_match", r.exact_match},
                     {"jaccard", r.jaccard},
                     {"failed", r.failed},
                     {"failure", r.failure},
                     {"status", r.status},
                     {"stage_invocations", r.stage_invocations},
                     {"collected_records", r.collected_records}});
  }
  return {{"evaluator", report.evaluator},
          {"mode", to_string(report.mode)},
          {"task_count", report.tasks.size()},
          {"accuracy", report.accuracy},
          {"mean_jaccard", report.mean_jaccard},
          {"failures", report.failures},
          {"stage_invocations", report.stage_invocations},
          {"collected_records", report.collected_records},
          {"elapsed_seconds", report.elapsed_seconds},
          {"tasks", tasks}};
}

json comparison_to_json(const std::vector<BenchmarkReport>& reports) {
  json rows = json::array();
  for (const auto& r : reports) {
    rows.push_back({{"evaluator", r.evaluator},
                    {"mode", to_string(r.mode)},
                    {"task_count", r.tasks.size()},
                    {"accuracy", r.accuracy},
                    {"mean_jaccard", r.mean_jaccard},
                    {"failures", r.failures},
                    {"stage_invocations", r.stage_invocations},
                    {"collected_records", r.collected_records}});
  }
  return {{"rows", rows}, {"table", render_table(reports)}};
}

}  // namespace chaintrust
