#pragma once

#include <cmath>
#include <cstdint>
#include <tuple>

#include "ccb/common.hpp"

namespace ccb {

// Control functions gating the training / exploration / exploitation phases.
// D1 = t^z1 ln t, D2 = F_max t^z2 ln t, D3 = t^z3 ln t. The exponents default
// to z = 2a/(3a+d); running with time appended as an extra context coordinate
// yields the d+1 variants automatically. Natural log throughout.
struct ControlParams {
  double z1 = 0.5;
  double z2 = 0.5;
  double z3 = 0.5;
  int F_max = 1;

  static double default_exponent(double alpha, int d) {
    return 2.0 * alpha / (3.0 * alpha + d);
  }

  static ControlParams theorem_defaults(double alpha, int d, int F_max) {
    const double z = default_exponent(alpha, d);
    return ControlParams{z, z, z, F_max};
  }
};

struct ControlValues {
  double D1 = 0.0;
  double D2 = 0.0;
  double D3 = 0.0;
};

inline ControlValues control_values(std::int64_t t, const ControlParams& p) {
  if (t < 1) throw ConfigError("control_values: t must be >= 1");
  const double td = static_cast<double>(t);
  const double lg = std::log(td);
  return ControlValues{std::pow(td, p.z1) * lg,
                       p.F_max * std::pow(td, p.z2) * lg,
                       std::pow(td, p.z3) * lg};
}

// Slicing parameter m_T = ceil(T^(1/(3a+d))). Pass the effective context
// dimension (d+1 when time is one of the coordinates).
inline int slicing_parameter(std::int64_t T, double alpha, int d) {
  if (T < 1) return 1;
  const double exponent = 1.0 / (3.0 * alpha + d);
  return static_cast<int>(std::ceil(std::pow(static_cast<double>(T), exponent)));
}

// DCZA zooming parameters: p = (3a + sqrt(9a^2 + 8ad)) / 2 and z = 2a/p < 1.
inline std::pair<double, double> dcza_parameters(double alpha, int d) {
  if (!(alpha > 0.0) || d < 1) throw ConfigError("dcza_parameters: need alpha > 0, d >= 1");
  const double p = (3.0 * alpha + std::sqrt(9.0 * alpha * alpha + 8.0 * alpha * d)) / 2.0;
  return {p, 2.0 * alpha / p};
}

}  // namespace ccb
