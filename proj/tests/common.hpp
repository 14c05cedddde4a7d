#pragma once

#include "xxz/dressed.hpp"
#include "xxz/params.hpp"

// Shared solved states so each suite pays the solve cost once.
inline const xxz::ThermoState& state_ff() {
  static xxz::ThermoState s({1.0, xxz::pi / 2.0, 2.0}, 128);
  return s;
}

inline const xxz::ThermoState& state_03() {
  const double zeta = 0.3 * xxz::pi;
  static xxz::ThermoState s({1.0, zeta, 0.5 * 8.0 * std::cos(zeta / 2) * std::cos(zeta / 2)}, 128);
  return s;
}

inline const xxz::ThermoState& state_07() {
  const double zeta = 0.7 * xxz::pi;
  static xxz::ThermoState s({1.0, zeta, 0.5 * 8.0 * std::cos(zeta / 2) * std::cos(zeta / 2)}, 128);
  return s;
}
