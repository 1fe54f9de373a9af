#include "parspl/power.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "parspl/error.hpp"

namespace parspl {

void PowerModelParams::validate() const {
  if (vf_table.empty()) throw Error(ErrorCode::invalid_argument, "power: empty V/F table");
  for (std::size_t i = 1; i < vf_table.size(); ++i)
    if (!(vf_table[i].v > vf_table[i - 1].v && vf_table[i].f > vf_table[i - 1].f))
      throw Error(ErrorCode::invalid_argument, "power: V/F table must be strictly increasing");
  if (!(p_min <= p_max)) throw Error(ErrorCode::invalid_argument, "power: p_min > p_max");
  if (ceff.empty()) throw Error(ErrorCode::invalid_argument, "power: no workload classes");
  if (!(f_min > 0 && f_min <= vf_table.front().f))
    throw Error(ErrorCode::invalid_argument, "power: f_min must lie below the table");
}

double leakage_factor(const PowerModelParams& pm, double t_si, double v, LeakageMode mode) {
  if (mode == LeakageMode::frozen) {
    t_si = pm.t_max;
    v = pm.v_max();
  }
  return std::exp(pm.k_v * v + pm.k_T * t_si + pm.k_T0);
}

double static_power(const PowerModelParams& pm, double v, double t_si, LeakageMode mode) {
  return pm.k_s0 + pm.icc * v * leakage_factor(pm, t_si, v, mode);
}

double ceff_for(const PowerModelParams& pm, int workload) {
  if (workload < 0 || workload >= static_cast<int>(pm.ceff.size()))
    throw Error(ErrorCode::invalid_argument, "power: unknown workload class " + std::to_string(workload));
  return pm.ceff[workload];
}

double power_forward(const PowerModelParams& pm, double v, double f, double t_si, int workload,
                     LeakageMode mode) {
  return static_power(pm, v, t_si, mode) + ceff_for(pm, workload) * f * v * v;
}

double max_frequency(const PowerModelParams& pm, double v) {
  const auto& t = pm.vf_table;
  if (v >= t.back().v) return t.back().f;
  if (v <= t.front().v) return t.front().f;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (v <= t[i].v) {
      const double w = (v - t[i - 1].v) / (t[i].v - t[i - 1].v);
      return t[i - 1].f + w * (t[i].f - t[i - 1].f);
    }
  return t.back().f;
}

double voltage_for_frequency(const PowerModelParams& pm, double f) {
  for (const auto& op : pm.vf_table)
    if (f <= op.f) return op.v;
  return pm.vf_table.back().v;
}

InverseResult power_inverse(const PowerModelParams& pm, double p_target, double t_si, int workload,
                            double domain_voltage, LeakageMode mode) {
  const double c = ceff_for(pm, workload);
  double v = domain_voltage;
  if (!(v > 0)) {
    v = pm.vf_table.back().v;
    for (const auto& op : pm.vf_table)
      if (power_forward(pm, op.v, op.f, t_si, workload, mode) >= p_target) {
        v = op.v;
        break;
      }
  }
  const double f_hi = max_frequency(pm, v);
  const double f_raw = (p_target - static_power(pm, v, t_si, mode)) / (c * v * v);
  const double f = std::clamp(f_raw, pm.f_min, f_hi);
  return {v, f, f != f_raw};
}

}  // namespace parspl
