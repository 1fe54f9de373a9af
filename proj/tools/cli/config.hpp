#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "parspl/admm.hpp"
#include "parspl/executor.hpp"
#include "parspl/mpc.hpp"
#include "parspl/power.hpp"
#include "parspl/sim.hpp"
#include "parspl/thermal.hpp"

namespace parspl::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr int kConfigFormatMajor = 1;
inline constexpr int kConfigFormatMinor = 0;

struct ScenarioKnobs {
  double duration = 2.0;
  int plant_substeps = 10;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
};

/// Everything needed to rebuild a problem instance bit for bit.
struct ProblemConfig {
  GridSpec grid;
  ThermalConstants thermal;
  PowerModelParams power;
  CostModelParams cost;
  AdmmSettings admm;
  ScenarioKnobs scenario;
  std::optional<double> cutoff;  // set once the problem has been pruned

  void validate() const;
};

json to_json(const ProblemConfig& c);

/// Missing keys keep their defaults, so a constants file may carry only a
/// few sections. Throws VersionError on an unknown major version.
ProblemConfig config_from_json(const json& j, ProblemConfig base = {});

ProblemConfig load_config(const fs::path& file, ProblemConfig base = {});
void save_json(const fs::path& file, const json& j);
json load_json(const fs::path& file);

/// "9x9" -> (9, 9).
std::pair<index_t, index_t> parse_grid(const std::string& s);

/// Default worker count: PARSPL_WORKERS if set, else 8.
int default_workers();

}  // namespace parspl::cli
