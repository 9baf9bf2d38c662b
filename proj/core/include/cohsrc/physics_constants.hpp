#pragma once

#include <numbers>

namespace cohsrc::constants {

// CODATA 2018 exact / recommended values, SI units.
inline constexpr double kPlanck = 6.62607015e-34;           // J s
inline constexpr double kElementaryCharge = 1.602176634e-19; // C
inline constexpr double kElectronMass = 9.1093837015e-31;   // kg

inline constexpr double kPi = std::numbers::pi;

// Kinetic energies beyond this are flagged as outside the non-relativistic regime.
inline constexpr double kNonRelativisticLimitEv = 10.0e3;

}  // namespace cohsrc::constants
