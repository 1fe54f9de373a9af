#include "config.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <regex>

namespace parspl::cli {

namespace {

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) {
    try {
      field = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

// JSON has no infinity; budgets and similar fields use null for +inf.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void ProblemConfig::validate() const {
  grid.validate();
  thermal.validate();
  power.validate();
  cost.validate();
  admm.validate();
  if (cutoff && !(*cutoff >= 0.0)) throw Error(ErrorCode::invalid_argument, "config: cutoff must be >= 0");
  if (!(scenario.duration > 0.0) || scenario.plant_substeps < 1 || !(scenario.noise_sigma >= 0.0))
    throw Error(ErrorCode::invalid_argument, "config: bad scenario section");
}

json to_json(const ProblemConfig& c) {
  json j;
  j["format"] = "parspl-problem";
  j["version"] = {kConfigFormatMajor, kConfigFormatMinor};
  j["grid"] = {{"nw", c.grid.nw}, {"nh", c.grid.nh}, {"hp", c.grid.hp}, {"ts", c.grid.ts},
               {"domains", c.grid.domains}};
  const auto& k = c.thermal;
  j["thermal"] = {{"c_si", k.c_si},       {"c_cu", k.c_cu},           {"c_sink_per_pe", k.c_sink_per_pe},
                  {"r_si_cu", k.r_si_cu}, {"r_si_lat", k.r_si_lat},   {"r_cu_sink", k.r_cu_sink},
                  {"r_sink_amb_pe", k.r_sink_amb_pe}, {"t_amb", k.t_amb}, {"t_limit", k.t_limit}};
  const auto& p = c.power;
  json vf = json::array();
  for (const auto& op : p.vf_table) vf.push_back({op.v, op.f});
  j["power"] = {{"k_s0", p.k_s0}, {"k_v", p.k_v},   {"k_T", p.k_T},         {"k_T0", p.k_T0},
                {"icc", p.icc},   {"ceff", p.ceff}, {"vf_table", vf},       {"f_min", p.f_min},
                {"p_min", p.p_min}, {"p_max", p.p_max}, {"t_max", p.t_max}};
  j["cost"] = {{"cycles_per_mac_streamed", c.cost.cycles_per_mac_streamed},
               {"cycles_per_mac_plain", c.cost.cycles_per_mac_plain},
               {"cycles_per_index_load", c.cost.cycles_per_index_load},
               {"barrier_overhead_cycles", c.cost.barrier_overhead_cycles},
               {"streaming_enabled", c.cost.streaming_enabled}};
  const auto& a = c.admm;
  j["admm"] = {{"rho", a.rho},           {"sigma", a.sigma},       {"alpha", a.alpha},
               {"max_iter", a.max_iter}, {"eps_prim", a.eps_prim}, {"eps_dual", a.eps_dual},
               {"check_interval", a.check_interval}, {"warm_start", a.warm_start},
               {"rho_eq_scale", a.rho_eq_scale},     {"divergence_limit", finite_or_null(a.divergence_limit)}};
  j["scenario"] = {{"duration", c.scenario.duration},
                   {"plant_substeps", c.scenario.plant_substeps},
                   {"noise_sigma", c.scenario.noise_sigma},
                   {"seed", c.scenario.seed}};
  j["cutoff"] = c.cutoff ? json(*c.cutoff) : json(nullptr);
  return j;
}

ProblemConfig config_from_json(const json& j, ProblemConfig c) {
  if (!j.is_object()) throw FormatError("config: top level must be an object");
  if (j.contains("version")) {
    const auto& v = j.at("version");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer())
      throw FormatError("config: version must be [major, minor]");
    if (v[0].get<int>() != kConfigFormatMajor)
      throw VersionError("config: unsupported format version " + std::to_string(v[0].get<int>()) + "." +
                         v[1].dump());
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    take(g, "nw", c.grid.nw);
    take(g, "nh", c.grid.nh);
    take(g, "hp", c.grid.hp);
    take(g, "ts", c.grid.ts);
    if (g.contains("domains"))
      take(g, "domains", c.grid.domains);
    else
      c.grid.domains = GridSpec::row_domains(c.grid.nw, c.grid.nh);
  }
  if (j.contains("thermal")) {
    const auto& t = j.at("thermal");
    auto& k = c.thermal;
    take(t, "c_si", k.c_si);
    take(t, "c_cu", k.c_cu);
    take(t, "c_sink_per_pe", k.c_sink_per_pe);
    take(t, "r_si_cu", k.r_si_cu);
    take(t, "r_si_lat", k.r_si_lat);
    take(t, "r_cu_sink", k.r_cu_sink);
    take(t, "r_sink_amb_pe", k.r_sink_amb_pe);
    take(t, "t_amb", k.t_amb);
    take(t, "t_limit", k.t_limit);
  }
  if (j.contains("power")) {
    const auto& t = j.at("power");
    auto& p = c.power;
    take(t, "k_s0", p.k_s0);
    take(t, "k_v", p.k_v);
    take(t, "k_T", p.k_T);
    take(t, "k_T0", p.k_T0);
    take(t, "icc", p.icc);
    take(t, "ceff", p.ceff);
    if (t.contains("vf_table")) {
      std::vector<std::array<double, 2>> rows;
      take(t, "vf_table", rows);
      p.vf_table.clear();
      for (const auto& r : rows) p.vf_table.push_back({r[0], r[1]});
    }
    take(t, "f_min", p.f_min);
    take(t, "p_min", p.p_min);
    take(t, "p_max", p.p_max);
    take(t, "t_max", p.t_max);
  }
  if (j.contains("cost")) {
    const auto& t = j.at("cost");
    take(t, "cycles_per_mac_streamed", c.cost.cycles_per_mac_streamed);
    take(t, "cycles_per_mac_plain", c.cost.cycles_per_mac_plain);
    take(t, "cycles_per_index_load", c.cost.cycles_per_index_load);
    take(t, "barrier_overhead_cycles", c.cost.barrier_overhead_cycles);
    take(t, "streaming_enabled", c.cost.streaming_enabled);
  }
  if (j.contains("admm")) {
    const auto& t = j.at("admm");
    auto& a = c.admm;
    take(t, "rho", a.rho);
    take(t, "sigma", a.sigma);
    take(t, "alpha", a.alpha);
    take(t, "max_iter", a.max_iter);
    take(t, "eps_prim", a.eps_prim);
    take(t, "eps_dual", a.eps_dual);
    take(t, "check_interval", a.check_interval);
    take(t, "warm_start", a.warm_start);
    take(t, "rho_eq_scale", a.rho_eq_scale);
    if (t.contains("divergence_limit")) {
      if (t.at("divergence_limit").is_null())
        a.divergence_limit = std::numeric_limits<double>::infinity();
      else
        take(t, "divergence_limit", a.divergence_limit);
    }
  }
  if (j.contains("scenario")) {
    const auto& t = j.at("scenario");
    take(t, "duration", c.scenario.duration);
    take(t, "plant_substeps", c.scenario.plant_substeps);
    take(t, "noise_sigma", c.scenario.noise_sigma);
    take(t, "seed", c.scenario.seed);
  }
  if (j.contains("cutoff")) {
    if (j.at("cutoff").is_null())
      c.cutoff.reset();
    else
      c.cutoff = j.at("cutoff").get<double>();
  }
  c.validate();
  return c;
}

json load_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::io, "cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
}

void save_json(const fs::path& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::io, "cannot write " + file.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::io, "write failed: " + file.string());
}

ProblemConfig load_config(const fs::path& file, ProblemConfig base) {
  return config_from_json(load_json(file), std::move(base));
}

std::pair<index_t, index_t> parse_grid(const std::string& s) {
  static const std::regex re(R"((\d+)x(\d+))");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw Error(ErrorCode::invalid_argument, "grid must look like 3x3, got '" + s + "'");
  const auto nw = std::stol(m[1]), nh = std::stol(m[2]);
  if (nw < 1 || nh < 1 || nw > 64 || nh > 64) throw Error(ErrorCode::invalid_argument, "grid out of range: " + s);
  return {static_cast<index_t>(nw), static_cast<index_t>(nh)};
}

int default_workers() {
  const char* env = std::getenv("PARSPL_WORKERS");
  if (!env || !*env) return 8;
  char* end = nullptr;
  const long w = std::strtol(env, &end, 10);
  if (*end != '\0' || w < 1 || w > 256)
    throw Error(ErrorCode::invalid_argument, std::string("PARSPL_WORKERS must be an integer in [1, 256], got '") + env + "'");
  return static_cast<int>(w);
}

}  // namespace parspl::cli
