// Regenerates data/transcripts/reference_trace.jsonl and data/golden/stage3_prompt.txt.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "chaintrust/benchmark.hpp"
#include "chaintrust/gateway.hpp"
#include "chaintrust/io.hpp"
#include "chaintrust/pipeline.hpp"

using namespace chaintrust;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  const fs::path data = argc > 1 ? fs::path(argv[1]) : fs::path(CHAINTRUST_DEFAULT_DATA_DIR);

  auto scripted = std::make_shared<ScriptedTransport>(std::vector<std::string>{
      "You aim to find trusted devices that can complete a 3D mapping task quickly and securely. To achieve "
      "this, the following subproblems need to be addressed sequentially: subproblem 1: which devices support "
      "the 3D mapping service? subproblem 2: which devices can ensure the task transmission process is secure "
      "and fast? subproblem 3: which devices can ensure the task execution process is secure and fast? "
      "subproblem 4: which devices can ensure the honest return of results?",
      "Devices $a_2$, $a_3$, $a_4$, $a_5$, $a_6$, $a_7$, $a_8$, $a_9$, $a_{10}$, $a_{11}$, $a_{12}$, $a_{13}$, "
      "$a_{14}$, $a_{17}$, $a_{18}$, $a_{19}$, $a_{20}$ offer the 3D mapping service.",
      "Devices $a_2$, $a_3$, $a_5$, $a_8$, $a_9$, $a_{10}$, $a_{11}$, $a_{12}$, $a_{13}$, and $a_{14}$ can  "
      "ensure the task transmission process is secure and fast.",
      "Devices $a_8$, $a_9$, $a_{10}$, $a_{11}$, $a_{12}$, $a_{13}$, and $a_{14}$ can ensure the task "
      "execution process is secure and fast.",
      "Devices $a_8$, $a_{10}$, and $a_{11}$ can ensure the honest return of results.",
  });

  fs::create_directories(data / "transcripts");
  fs::create_directories(data / "golden");
  auto recorder = std::make_shared<RecordingTransport>(scripted, data / "transcripts" / "reference_trace.jsonl");
  PromptEvaluator evaluator(recorder, ExemplarSet::load(data / "exemplars"), {}, "scripted");

  auto registry = registry_from_fleet(load_fleet(data / "fleet.json"));
  const auto trace = run_chain(reference_task(), registry, evaluator);
  if (trace.status.kind != ChainStatusKind::complete) {
    std::cerr << "chain did not complete: " << trace.status.str() << '\n';
    return 1;
  }
  const auto* comm = trace.last_record_of(StageId::communication);
  std::ofstream(data / "golden" / "stage3_prompt.txt", std::ios::binary) << comm->prompt;
  std::cout << "final: " << render_set(trace.final_set) << '\n';
  return 0;
}
