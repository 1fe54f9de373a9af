#pragma once

#include <vector>

namespace parspl {

struct OperatingPoint {
  double v;  // volts
  double f;  // Hz, highest frequency sustainable at v
};

enum class LeakageMode { nonlinear, frozen };

struct PowerModelParams {
  double k_s0 = 0.02;
  double k_v = 1.0;
  double k_T = 0.02;
  double k_T0 = -3.0;
  double icc = 0.15;
  std::vector<double> ceff{0.2e-9, 0.5e-9, 0.8e-9, 1.0e-9};  // per workload class
  std::vector<OperatingPoint> vf_table{
      {0.60, 0.8e9}, {0.70, 1.2e9}, {0.80, 1.6e9}, {0.90, 2.0e9}, {1.00, 2.4e9}};
  double f_min = 0.1e9;
  double p_min = 0.05;
  double p_max = 2.5;
  // Critical point at which the controller freezes the leakage factor.
  double t_max = 85.0;

  [[nodiscard]] double v_max() const { return vf_table.back().v; }
  [[nodiscard]] double v_min() const { return vf_table.front().v; }
  void validate() const;
};

/// exp(k_v V + k_T T + k_T0), or its value at (t_max, v_max) when frozen.
double leakage_factor(const PowerModelParams& pm, double t_si, double v, LeakageMode mode);

double static_power(const PowerModelParams& pm, double v, double t_si, LeakageMode mode);

double ceff_for(const PowerModelParams& pm, int workload);

double power_forward(const PowerModelParams& pm, double v, double f, double t_si, int workload,
                     LeakageMode mode = LeakageMode::nonlinear);

struct InverseResult {
  double v;
  double f;
  bool clamped;
};

/// Smallest table voltage that reaches p_target within its frequency range
/// (or domain_voltage when positive), then f solves the power equation,
/// clamped to [f_min, f_max(v)].
InverseResult power_inverse(const PowerModelParams& pm, double p_target, double t_si, int workload,
                            double domain_voltage = 0.0,
                            LeakageMode mode = LeakageMode::nonlinear);

/// Lowest table voltage whose maximum frequency reaches f.
double voltage_for_frequency(const PowerModelParams& pm, double f);

/// Highest frequency available at voltage v (interpolates below the table).
double max_frequency(const PowerModelParams& pm, double v);

}  // namespace parspl
