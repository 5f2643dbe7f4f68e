#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "chaintrust/benchmark.hpp"
#include "chaintrust/gateway.hpp"
#include "chaintrust/io.hpp"
#include "chaintrust/pipeline.hpp"
#include "cli.hpp"

namespace py = pybind11;
using namespace chaintrust;

namespace {

std::vector<std::string> names(const DeviceSet& s) {
  std::vector<std::string> out;
  for (const auto& id : s) out.push_back(id.str());
  return out;
}

ChainSpec spec_from(const std::optional<std::vector<std::string>>& stages) {
  ChainSpec spec;
  if (stages) {
    spec.stages.clear();
    for (const auto& s : *stages) spec.stages.push_back(parse_stage(s));
  }
  spec.validate();
  return spec;
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_chaintrust, m) {
  m.doc() = "Progressive trust evaluation of collaborator devices";

  py::register_exception<FleetParseError>(m, "FleetParseError", PyExc_ValueError);
  py::register_exception<EvaluatorFailure>(m, "EvaluatorFailure", PyExc_RuntimeError);
  py::register_exception<RegistryError>(m, "RegistryError", PyExc_ValueError);

  py::class_<Task>(m, "Task")
      .def(py::init([](const std::string& service, const std::string& owner) {
             Task t;
             t.owner = DeviceId::parse(owner);
             t.required_service = service;
             validate_task(t);
             t.text = render_task_text(t);
             return t;
           }),
           py::arg("service"), py::arg("owner") = "a1")
      .def_static("parse", [](const std::string& text, const std::string& owner) {
        return parse_task_text(text, DeviceId::parse(owner));
      }, py::arg("text"), py::arg("owner") = "a1")
      .def_static("reference", &reference_task)
      .def_property_readonly("owner", [](const Task& t) { return t.owner.str(); })
      .def_readwrite("required_service", &Task::required_service)
      .def_readwrite("wants_fast_comm", &Task::wants_fast_comm)
      .def_readwrite("wants_secure_comm", &Task::wants_secure_comm)
      .def_readwrite("wants_fast_compute", &Task::wants_fast_compute)
      .def_readwrite("wants_secure_compute", &Task::wants_secure_compute)
      .def_readwrite("wants_honest_delivery", &Task::wants_honest_delivery)
      .def_property("text", [](const Task& t) { return t.text; }, [](Task& t, const std::string& s) { t.text = s; })
      .def("render_text", [](Task& t) {
        t.text = render_task_text(t);
        return t.text;
      });

  py::class_<RulePolicy>(m, "RulePolicy")
      .def(py::init<>())
      .def_readwrite("fast_comm_min_rate_mb_s", &RulePolicy::fast_comm_min_rate_mb_s)
      .def_readwrite("fast_compute_min_ghz", &RulePolicy::fast_compute_min_ghz)
      .def_readwrite("gpu_counts_as_fast", &RulePolicy::gpu_counts_as_fast)
      .def_property("secure_comm_min", [](const RulePolicy& p) { return std::string(to_string(p.secure_comm_min)); },
                    [](RulePolicy& p, const std::string& s) { p.secure_comm_min = parse_security(s); })
      .def_property("secure_compute_min",
                    [](const RulePolicy& p) { return std::string(to_string(p.secure_compute_min)); },
                    [](RulePolicy& p, const std::string& s) { p.secure_compute_min = parse_security(s); })
      .def_property("honest_delivery_min",
                    [](const RulePolicy& p) { return std::string(to_string(p.honest_delivery_min)); },
                    [](RulePolicy& p, const std::string& s) { p.honest_delivery_min = parse_loyalty(s); });

  py::class_<Registry>(m, "Registry")
      .def_static("from_fleet_file", [](const std::filesystem::path& p) { return registry_from_fleet(load_fleet(p)); })
      .def_static("from_fleet_json", [](const std::string& text) { return registry_from_fleet(parse_fleet(text)); })
      .def("__len__", &Registry::size)
      .def("ids", [](const Registry& r) { return names(r.ids()); })
      .def_property_readonly("clock", &Registry::clock)
      .def_property_readonly("collected_records", &Registry::collected_records)
      .def("set_loyalty", [](Registry& r, const std::string& id, const std::string& level) {
        r.update_family(DeviceId::parse(id), ResultDeliveryAttribute{parse_loyalty(level)});
      })
      .def("set_comm", [](Registry& r, const std::string& id, double rate, const std::string& security) {
        r.update_family(DeviceId::parse(id), CommAttributes{rate, parse_security(security)});
      })
      .def("to_json", [](const Registry& r) { return fleet_to_json(fleet_of(r)).dump(2); });

  py::class_<EvaluationTrace>(m, "Trace")
      .def_property_readonly("final_set", [](const EvaluationTrace& t) { return names(t.final_set); })
      .def_property_readonly("status", [](const EvaluationTrace& t) { return t.status.str(); })
      .def_property_readonly("collected_records", &EvaluationTrace::collected_records)
      .def("survivors", [](const EvaluationTrace& t, const std::string& stage) -> std::optional<std::vector<std::string>> {
        const auto* rec = t.last_record_of(parse_stage(stage));
        if (!rec) return std::nullopt;
        return names(rec->survivors);
      })
      .def("prompt", [](const EvaluationTrace& t, const std::string& stage) -> std::optional<std::string> {
        const auto* rec = t.last_record_of(parse_stage(stage));
        if (!rec) return std::nullopt;
        return rec->prompt;
      })
      .def("to_json", [](const EvaluationTrace& t) { return trace_to_json(t).dump(2); });

  m.def("run_rule_chain", [](const Task& task, Registry& registry, const RulePolicy& policy,
                             const std::optional<std::vector<std::string>>& stages) {
    RuleEvaluator ev(policy);
    return run_chain(task, registry, ev, spec_from(stages));
  }, py::arg("task"), py::arg("registry"), py::arg("policy") = RulePolicy{}, py::arg("stages") = py::none(),
        "Runs the staged chain with the threshold evaluator. Mutates the registry's clock and log.");

  m.def("run_replay_chain", [](const Task& task, Registry& registry, const std::filesystem::path& transcript,
                               const std::filesystem::path& exemplar_dir) {
    PromptEvaluator ev(record_replay(TranscriptMode::replay, transcript), ExemplarSet::load(exemplar_dir), {},
                       "scripted");
    return run_chain(task, registry, ev);
  }, py::arg("task"), py::arg("registry"), py::arg("transcript"), py::arg("exemplar_dir"));

  m.def("reevaluate_rule_stage", [](const EvaluationTrace& trace, const std::string& stage, Registry& registry,
                                    const RulePolicy& policy) {
    RuleEvaluator ev(policy);
    return reevaluate_stage(trace, parse_stage(stage), registry, ev);
  }, py::arg("trace"), py::arg("stage"), py::arg("registry"), py::arg("policy") = RulePolicy{});

  m.def("ground_truth", [](const Task& t, const Registry& r, const RulePolicy& p) { return names(ground_truth(t, r, p)); },
        py::arg("task"), py::arg("registry"), py::arg("policy") = RulePolicy{});

  m.def("validate_fleet", [](const std::filesystem::path& p) { return validate_fleet(load_fleet(p)); });

  m.def("verify_trace", [](const std::string& trace_json, const std::filesystem::path& fleet) {
    return verify_trace(nlohmann::json::parse(trace_json), load_fleet(fleet));
  });

  m.def("prompt_hash", &prompt_hash);

  m.def("cli", &run_cli, py::arg("args"), "Runs the command-line interface; returns (exit_code, stdout, stderr).");
}
