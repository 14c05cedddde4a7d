#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <fmt/format.h>

#include "xxz/errors.hpp"

namespace xxz {

inline constexpr double pi = std::numbers::pi;

// Coupling constants of the spin-1/2 XXZ chain in its massless antiferromagnetic
// regime: exchange J > 0, anisotropy angle zeta in (0, pi) (Delta = cos zeta),
// longitudinal field 0 < h < h_c = 8 J cos^2(zeta/2).
struct ModelParams {
  double J = 1.0;
  double zeta = 0.5 * pi;
  double h = 1.0;

  double h_critical() const { return 8.0 * J * std::pow(std::cos(0.5 * zeta), 2); }

  void validate() const {
    if (!(J > 0.0))
      throw validation_error(fmt::format("J must be positive, got {}", J));
    if (!(zeta > 0.0 && zeta < pi))
      throw validation_error(fmt::format("zeta must lie in (0, pi), got {}", zeta));
    const double hc = h_critical();
    if (!(h > 0.0 && h < hc))
      throw validation_error(
          fmt::format("h must lie in (0, h_c) with h_c = 8 J cos^2(zeta/2) = {}, got {}", hc, h));
  }
};

// Pauli operator label entering two-point functions. The pseudo-spin s_gamma is
// 0 for sigma^z and -/+1 for sigma^+/-: sigma^z conserves the magnetization
// while sigma^{+-} changes it by one unit.
enum class Operator { sigma_z, sigma_plus, sigma_minus };

inline int pseudo_spin(Operator op) {
  switch (op) {
    case Operator::sigma_z: return 0;
    case Operator::sigma_plus: return -1;
    case Operator::sigma_minus: return 1;
  }
  return 0;
}

inline std::string operator_name(Operator op) {
  switch (op) {
    case Operator::sigma_z: return "sigma_z";
    case Operator::sigma_plus: return "sigma_plus";
    case Operator::sigma_minus: return "sigma_minus";
  }
  return "?";
}

inline Operator operator_from_name(const std::string& s) {
  if (s == "sigma_z" || s == "z") return Operator::sigma_z;
  if (s == "sigma_plus" || s == "+") return Operator::sigma_plus;
  if (s == "sigma_minus" || s == "-") return Operator::sigma_minus;
  throw validation_error(fmt::format("unknown operator '{}'; use sigma_z, sigma_plus or sigma_minus", s));
}

} // namespace xxz
