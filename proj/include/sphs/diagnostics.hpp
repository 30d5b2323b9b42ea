#pragma once

#include <map>
#include <string>
#include <vector>

#include "sphs/moments.hpp"
#include "sphs/noise.hpp"
#include "sphs/solver.hpp"
#include "sphs/string_example.hpp"

namespace sphs {

// ---------------------------------------------------------------------------
// Ito isometry

struct ItoIsometryReport {
    int paths = 0;
    double t = 0.0;
    // flat stochastic integral: E||int_0^t H dw||_X^2 vs t Tr[HQH*]
    double flat_mc = 0.0, flat_se = 0.0, flat_expected = 0.0;
    bool flat_ok = false;
    // stochastic convolution: modal covariance trace vs Lyapunov closed form
    double conv_mc = 0.0, conv_se = 0.0, conv_expected = 0.0;
    bool conv_ok = false;
};

ItoIsometryReport ito_isometry_check(const PhsModel& model, const ModalBasis& basis,
                                     const ResolvedNoise& noise, double t, int steps,
                                     int paths, uint64_t seed, int workers = 0);

// ---------------------------------------------------------------------------
// Admissibility / Hilbert-Schmidt domain diagnostics

struct AdmissibilityReport {
    double t = 0.0;
    std::vector<int> checkpoints;   // mode-count truncations K
    Vec partial_sums;               // value at each checkpoint
    double tail_ratio = 0.0;        // (S_last - S_prev)/S_last
    double growth_exponent = 0.0;   // log-log slope of S(K)
    bool convergent = false;        // tail below tolerance
    double tail_tol = 1e-6;
};

// sum_{k<K} sum_i q_i |h_ki|^2 |lambda_k|^2 (e^{2 Re lambda_k t} - 1)/(2 Re lambda_k),
// with the Re -> 0 limit t |lambda_k|^2. Divergence is a finding, not an error.
AdmissibilityReport admissibility_integral(const CVec& lambdas, const CMat& coupling,
                                           const Vec& q, double t,
                                           const std::vector<int>& checkpoints,
                                           double tail_tol = 1e-6);

struct HsDomainReport {
    std::vector<int> checkpoints;
    Vec partial_sums;  // sum_i q_i sum_k |lambda_k|^2 |h_ki|^2
    double tail_ratio = 0.0;
    bool finite = false;
    double tail_tol = 1e-6;
};

HsDomainReport hs_domain_check(const CVec& lambdas, const CMat& coupling, const Vec& q,
                               const std::vector<int>& checkpoints,
                               double tail_tol = 1e-6);

// Extends the computed basis spectrum with characteristic-equation roots (and
// zero coupling rows, or the flat rule's constant) so the mode sums can be
// taken far beyond the simulated truncation. String-specific.
void extend_string_spectrum(const ModalBasis& basis, const ResolvedNoise& noise,
                            const QWienerSpec& spec, const StringParams& params,
                            int K_max, CVec* lambdas_out, CMat* coupling_out);

// ---------------------------------------------------------------------------
// Well-posedness ratio study

struct WellposednessReport {
    Vec tf_grid;
    Vec max_ratios;                     // empirical m_tf per horizon
    Mat member_ratios;                  // members x horizons
    std::map<std::string, bool> conditions;
    double growth_exponent = 0.0;       // LSQ slope of log max-ratio vs log tf
    bool bounded_verdict = false;       // growth exponent < 0.1
    std::string ensemble_description;
    std::string limitation;
};

struct WellposednessOptions {
    std::vector<double> tf_grid{0.5, 1.0, 2.0, 4.0};
    int members = 20;
    int paths_per_member = 128;
    double dt = 1e-3;
    uint64_t seed = 1;
    int workers = 0;
    Scheme scheme = Scheme::Increment;
};

// Ratio [E||eps(tf)||^2 + E int ||y||^2] / [E||eps0||^2 + int ||u||^2 + Tr Q]
// maximized over a deterministic pseudo-random ensemble of compatible
// (eps0, u) pairs (eps0 = modal state + B u(0), so u(0) = B[eps0] holds by
// construction).
WellposednessReport wellposedness_ratio(const PhsModel& model, const ModalBasis& basis,
                                        const BoundaryLift& lift,
                                        const ResolvedNoise& noise,
                                        const QWienerSpec& spec,
                                        const WellposednessOptions& opt);

// ---------------------------------------------------------------------------
// Mean-square continuity

struct ContinuityReport {
    Vec h_grid;
    Vec mean_sq_increment;  // E||X(t0+h) - X(t0)||_X^2
    double slope = 0.0;     // log-log fit
    bool ok = false;        // slope > 0
};

ContinuityReport ms_continuity_check(const MildSimulator& sim, const CVec& x0,
                                     double t0, const std::vector<double>& h_grid,
                                     int paths, uint64_t seed, int workers = 0);

// ---------------------------------------------------------------------------
// Energy balance (expected energy drift vs boundary power vs noise rate)

struct EnergyBalanceReport {
    double window_start = 0.0, window_end = 0.0;
    double mc_drift = 0.0;       // mean over paths of [E(t2)-E(t1)-int power]/(t2-t1)
    double mc_se = 0.0;
    double expected_rate = 0.0;  // (1/2) Tr[H_density H Q H*]
    bool ok = false;
    int paths = 0;
};

EnergyBalanceReport energy_balance_check(const PhsModel& model, const ModalBasis& basis,
                                         const ResolvedNoise& noise, const TimeGrid& grid,
                                         double window_start, double window_end,
                                         const CVec& x0, int paths, uint64_t seed,
                                         int workers = 0);

// ---------------------------------------------------------------------------
// Refinement studies (shared Brownian paths across step sizes)

struct RefinementReport {
    Vec dts;
    Vec errors;       // mean over paths
    double order = 0.0;  // log-log slope
};

// Increment-scheme endpoint state vs the Riesz-series evaluation of the same
// stochastic convolution on shared (coarsened) Brownian increments.
RefinementReport convolution_equivalence_study(const ModalBasis& basis,
                                               const ResolvedNoise& noise, double t,
                                               const std::vector<int>& coarsenings,
                                               double dt_fine, int paths, uint64_t seed);

// Weak-identity residual at t_final across step sizes, z given in psi coords.
RefinementReport weak_residual_study(const ModalBasis& basis, const ResolvedNoise& noise,
                                     const CVec& z_psi_coeffs, double t,
                                     const std::vector<int>& coarsenings, double dt_fine,
                                     int paths, uint64_t seed);

// Integral-identity residual of the Yosida-approximate extended system at the
// final time, across step sizes on shared Brownian paths.
RefinementReport extended_residual_study(const PhsModel& model, const ModalBasis& basis,
                                         const BoundaryLift& lift,
                                         const ResolvedNoise& noise,
                                         const InputSignal& input, double lambda_scale,
                                         double t, const std::vector<int>& coarsenings,
                                         double dt_fine, int paths, uint64_t seed,
                                         const Vec& u0, const CVec& x0);

// Yosida ladder: sup-in-time mean-square gap between X^e_lambda and the mild
// extended solution, one entry per lambda (common noise across the ladder).
struct YosidaLadderReport {
    Vec lambdas;
    Vec sup_errors;
    bool monotone = false;
};

YosidaLadderReport yosida_ladder(const PhsModel& model, const ModalBasis& basis,
                                 const BoundaryLift& lift, const ResolvedNoise& noise,
                                 const InputSignal& input, const std::vector<double>& lambdas,
                                 const TimeGrid& grid, Scheme scheme, const Vec& u0,
                                 const CVec& x0, int paths, uint64_t seed, int workers = 0);

// log-log least-squares slope helper.
double loglog_slope(const Vec& x, const Vec& y);

}  // namespace sphs
