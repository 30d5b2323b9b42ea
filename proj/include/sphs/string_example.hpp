#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "sphs/model.hpp"
#include "sphs/noise.hpp"

namespace sphs {

struct StringParams {
    double rho = 1.0;        // mass density
    double T_modulus = 4.0;  // Young's modulus
    double a = 0.0, b = 1.0;
};

// The vibrating string with a force input at the left end and a damper at the
// right end, in momentum/strain coordinates eps = (rho z_t, z_z):
//   P1 = [[0,1],[1,0]], P0 = 0, H = diag(1/rho, T)
//   WB1 = (1/sqrt2)[-1 0 0 1]   (input  u = T(a) z_z(a))
//   WB2 = (1/sqrt2)[ 1 1 1 1]   (damper T(b) z_z(b) + z_t(b) = 0)
//   WC  = (1/sqrt2)[ 0 -1 1 0]  (output y = z_t(a))
// plus the corrected affine lift Bu = [0; g(z) u], g(a) = 1/T(a), g(b) = 0.
// (The uncorrected constant profile [0; u/T(a)] leaves a nonzero WB2 port.)
struct StringModel {
    PhsModel model;
    BoundaryLift lift;
    QWienerSpec default_noise;        // momentum-channel sine noise
    bool impedance_matched = false;   // sqrt(T rho) = 1: no uniform-gap spectrum
    StringParams params;
};

StringModel build_string_model(const StringParams& params);

// Named desk-scale benchmark configurations with pinned seeds. The files under
// benchmarks/ are golden copies of exactly these objects.
std::vector<std::pair<std::string, nlohmann::json>> string_acceptance_configs();

// The two readings of the string's noise intensity, shipped side by side:
// "noise-spde-form" injects eta into the momentum equation unscaled, while
// "noise-wave-form" carries the 1/rho(z) factor of the second-order equation
// into the profile itself.
std::vector<std::pair<std::string, nlohmann::json>> string_noise_variant_configs();

// Canonical serialization used for the golden files (2-space indent, sorted
// keys, trailing newline).
std::string config_to_bytes(const nlohmann::json& config);

}  // namespace sphs
