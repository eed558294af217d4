#pragma once

// Unit conventions used throughout:
//   energies are stored as E/h in GHz, time in ns, detuning inputs in ueV,
//   magnetic fields in mT. Phases are then 2*pi*f*t with no stray factors.

namespace qdsim::constants {

// Planck constant, ueV per GHz (CODATA).
inline constexpr double planck_uev_per_ghz = 4.135667696;

// Bohr magneton over h, GHz per mT (CODATA: 13.9962449 GHz/T).
inline constexpr double mu_b_ghz_per_mt = 13.9962449e-3;

}  // namespace qdsim::constants

namespace qdsim {

// eps in ueV -> frequency in GHz (E/h).
inline constexpr double to_frequency(double eps_uev) {
    return eps_uev / constants::planck_uev_per_ghz;
}

// frequency in GHz -> energy in ueV. Exact inverse of to_frequency.
inline constexpr double to_energy_uev(double f_ghz) {
    return f_ghz * constants::planck_uev_per_ghz;
}

}  // namespace qdsim
