#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "chaintrust/benchmark.hpp"
#include "chaintrust/io.hpp"
#include "chaintrust/pipeline.hpp"

namespace testsupport {

using namespace chaintrust;

inline std::filesystem::path data_dir() { return CHAINTRUST_TEST_DATA_DIR; }

inline std::vector<Device> fixture_fleet() { return load_fleet(data_dir() / "fleet.json"); }
inline Registry fixture_registry() { return registry_from_fleet(fixture_fleet()); }

inline DeviceSet ids(std::initializer_list<int> xs) {
  DeviceSet s;
  for (int x : xs) s.insert(DeviceId(static_cast<std::uint32_t>(x)));
  return s;
}

inline DeviceSet range(int lo, int hi) {
  DeviceSet s;
  for (int i = lo; i <= hi; ++i) s.insert(DeviceId(static_cast<std::uint32_t>(i)));
  return s;
}

inline DeviceSet unite(DeviceSet a, const DeviceSet& b) {
  a.insert(b.begin(), b.end());
  return a;
}

// Word-wise lowercase comparison, written separately from the library's normalizer.
inline std::string words_lower(const std::string& s) {
  std::istringstream in(s);
  std::string w, out;
  while (in >> w) {
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

inline int rank(SecurityLevel l) { return l == SecurityLevel::low ? 0 : l == SecurityLevel::medium ? 1 : 2; }
inline int rank(Loyalty l) { return l == Loyalty::low ? 0 : l == Loyalty::medium ? 1 : 2; }

// Expected survivors straight from raw device records.
inline bool oracle_keeps(const Device& d, const Task& t, const RulePolicy& p) {
  const auto want = words_lower(t.required_service);
  const bool offers = std::any_of(d.services.begin(), d.services.end(),
                                  [&](const std::string& s) { return words_lower(s) == want; });
  if (!offers) return false;
  if (t.wants_fast_comm && d.comm.rate_mb_per_s < p.fast_comm_min_rate_mb_s) return false;
  if (t.wants_secure_comm && rank(d.comm.security) < rank(p.secure_comm_min)) return false;
  if (t.wants_fast_compute && !(d.compute.cpu_clock_ghz >= p.fast_compute_min_ghz ||
                                (p.gpu_counts_as_fast && d.compute.has_gpu))) {
    return false;
  }
  if (t.wants_secure_compute && rank(d.compute.security) < rank(p.secure_compute_min)) return false;
  if (t.wants_honest_delivery && rank(d.delivery.loyalty) < rank(p.honest_delivery_min)) return false;
  return true;
}

inline DeviceSet oracle(const std::vector<Device>& fleet, const Task& t, const RulePolicy& p) {
  DeviceSet out;
  for (const auto& d : fleet) {
    if (d.id != t.owner && oracle_keeps(d, t, p)) out.insert(d.id);
  }
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("chaintrust_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testsupport
