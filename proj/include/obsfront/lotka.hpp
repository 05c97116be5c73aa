#pragma once

#include <array>

#include "obsfront/system.hpp"

namespace obsfront {

struct LVParams {
  double k1 = 1.1;
  double k2 = 2.0;
  double r = 1.0;
  double d = 1.0;
};

void validate(const LVParams& p);

// Cooperative form obtained from the competition model by flipping the second species.
SystemDef lv_system(const LVParams& p);

// Right-hand side of the original competition model (not cooperative).
std::array<double, 2> lv_competitive_field(const LVParams& p, std::array<double, 2> u);

// (u1, u2) -> (u1, 1 - u2); an involution, so it is also its own inverse.
std::array<double, 2> lv_transform(std::array<double, 2> u);
std::array<double, 2> lv_inverse_transform(std::array<double, 2> u);

struct LVSpeedConditions {
  bool P1 = false, P2 = false, P3 = false, P4 = false;
  int p3_witness_n = 0;  // smallest admissible n when P3 holds
  bool any() const { return P1 || P2 || P3 || P4; }
};

LVSpeedConditions lv_speed_conditions(const LVParams& p, int n_max = 64);

}  // namespace obsfront
