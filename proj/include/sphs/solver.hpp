#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sphs/model.hpp"
#include "sphs/noise.hpp"
#include "sphs/rng.hpp"
#include "sphs/spectral.hpp"
#include "sphs/types.hpp"

namespace sphs {

// Deterministic boundary input u(t). When no analytic derivative is supplied
// the simulator falls back to second-order finite differences of the samples
// and flags it in the run metadata.
struct InputSignal {
    int m = 1;
    std::function<Vec(double)> u;
    std::function<Vec(double)> udot;  // may be empty
    bool analytic_derivative() const { return bool(udot); }

    static InputSignal zero(int m);
    static InputSignal constant(Vec value);
    // u_j(t) = amp_j * sin(omega_j t + phase_j)
    static InputSignal sine(Vec amp, Vec omega, Vec phase);
};

struct TimeGrid {
    double dt = 0.0;
    int steps = 0;
    Vec times() const;
    double t_final() const { return dt * steps; }
};

enum class Scheme { ExactGaussian, Increment };

struct ModalTrajectory {
    Vec times;
    CMat states;  // K x times
};

// Modal forcing coefficients of the lifted input terms:
//   a(k,j) = <A B e_j, psi_k>_X    (generator applied to the lift profile)
//   b(k,j) = <B e_j, psi_k>_X
struct ForcingCoeffs {
    CMat a, b;  // K x m
};
ForcingCoeffs lift_forcing_coeffs(const PhsModel& model, const ModalBasis& basis,
                                  const BoundaryLift& lift);

// Per-mode exact exponential propagation of the mild solution
//   x_k(t+dt) = e^{lambda_k dt} x_k(t) + (forcing step) + (noise increment)
// with the forcing step integrating e^{lambda (dt-s)} against the linear
// interpolant of g_k = <A B u - B udot, psi_k> (phi-function rule, exact for
// piecewise-linear inputs).
//
// Noise increments per scheme:
//   ExactGaussian - samples the cross-mode-correlated Gaussian convolution
//       increment; its covariance C_kl = sum_i q_i h_ki conj(h_li)
//       (e^{(l_k+conj l_l)dt}-1)/(l_k+conj l_l) (and the matching
//       pseudo-covariance) is factorized once per step size.
//   Increment - order-1/2 rule e^{lambda dt} h_ki dbeta_i on the same
//       Brownian increments that sample_path materializes, so series /
//       per-step cross-checks can share paths bit-for-bit.
class MildSimulator {
  public:
    MildSimulator(const PhsModel& model, const ModalBasis& basis,
                  const ResolvedNoise& noise, const TimeGrid& grid, Scheme scheme,
                  const BoundaryLift* lift = nullptr, const InputSignal* input = nullptr);

    // Explicit modal forcing samples g (K x steps+1) instead of a lifted input.
    MildSimulator(const PhsModel& model, const ModalBasis& basis,
                  const ResolvedNoise& noise, const TimeGrid& grid, Scheme scheme,
                  CMat forcing_samples);

    int modes() const { return K_; }
    const TimeGrid& time_grid() const { return grid_; }
    const ModalBasis& basis() const { return *basis_; }
    bool finite_difference_udot() const { return fd_udot_; }

    // Runs one path, invoking obs(step, t, state) at every node including 0.
    template <class Obs>
    void run_with(uint64_t seed, uint64_t path_index, const CVec& x0, Obs&& obs) const {
        CVec x = x0;
        obs(0, 0.0, static_cast<const CVec&>(x));
        std::vector<double> dw(nq_.size());
        std::vector<double> xi(2 * K_);
        Vec eta_real(2 * K_);
        for (int s = 0; s < grid_.steps; ++s) {
            if (scheme_ == Scheme::Increment) {
                brownian_increments(nq_, grid_.dt, seed, path_index, s, dw.data());
                for (int k = 0; k < K_; ++k) {
                    cplx noise_k = 0.0;
                    for (size_t i = 0; i < dw.size(); ++i) noise_k += h_(k, i) * dw[i];
                    if (has_forcing_)
                        x[k] = decay_[k] * x[k] + forcing_step_(k, s) + decay_[k] * noise_k;
                    else
                        x[k] = decay_[k] * x[k] + decay_[k] * noise_k;
                }
            } else {
                rng::fill_normals(seed, path_index, uint32_t(s), rng::kConvolutionStream,
                                  2 * K_, xi.data());
                eta_real.noalias() =
                    cov_factor_ * Eigen::Map<const Vec>(xi.data(), 2 * K_);
                for (int k = 0; k < K_; ++k) {
                    const cplx eta(eta_real[k], eta_real[K_ + k]);
                    if (has_forcing_)
                        x[k] = decay_[k] * x[k] + forcing_step_(k, s) + eta;
                    else
                        x[k] = decay_[k] * x[k] + eta;
                }
            }
            obs(s + 1, (s + 1) * grid_.dt, static_cast<const CVec&>(x));
        }
    }

    ModalTrajectory run(uint64_t seed, uint64_t path_index, const CVec& x0) const;

  private:
    void finish_setup(const PhsModel& model);

    const ModalBasis* basis_;
    TimeGrid grid_;
    Scheme scheme_;
    int K_ = 0;
    CVec decay_;
    CMat h_;             // K x I coupling
    Vec nq_;             // channel variances
    CMat forcing_step_;  // K x steps, phi-rule step integrals
    bool has_forcing_ = false;
    bool fd_udot_ = false;
    Mat cov_factor_;     // 2K x 2K, exact-gaussian factor M with M M^T = Cov
};

// phi-function step integrals (exposed for the moment closed forms and tests).
cplx phi1(cplx z);
cplx phi2(cplx z);

// Compatibility check u(0) = B[eps0] for a grid initial state.
void check_compatibility(const GridFn& eps0, const PhsModel& model,
                         const InputSignal& input, double tol = 1e-6);

// eps(t) = sum_k x_k(t) phi_k + B u(t); outputs y = W_C ports(eps) and the
// energy E(eps) per stored time. keep_fields materializes the grid fields.
struct ReconstructionResult {
    Vec times;
    Vec energies;
    Mat outputs;       // p x times
    double max_imag_residual = 0.0;
    std::vector<GridFn> fields;
};

ReconstructionResult reconstruct_epsilon(const ModalTrajectory& traj,
                                         const ModalBasis& basis, const PhsModel& model,
                                         const BoundaryLift* lift = nullptr,
                                         const InputSignal* input = nullptr,
                                         bool keep_fields = false);

// Riesz-series evaluation of the stochastic convolution W_A(t) from a stored
// Brownian path:
//   w_k = sum_i h_ki beta_i(t) + lambda_k sum_i h_ki trapz(e^{lambda_k (t-s)} beta_i(s))
// (integration-by-parts form of int e^{lambda (t-s)} dbeta).
CVec convolution_series(const ModalBasis& basis, const ResolvedNoise& noise,
                        const BrownianPath& path, double t);

// ---------------------------------------------------------------------------
// Extended system (strong solutions via the resolvent-smoothed control map)

struct ExtendedTrajectory {
    Vec times;
    Mat u_states;  // m x times
    CMat x_states; // K x times
};

// Simulates dX^e = A^e X^e dt + B^e_lambda u' dt + H^e dw on K^m (+) span(phi)
// with A^e = [[0,0],[AB, diag(lambda)]] and
// B^e_lambda = lambda_scale R(lambda_scale, A^e) B^e realized per mode as
//   (a_k - lambda_scale b_k) / (lambda_scale - lambda_k).
// lambda_scale = +infinity selects the unsmoothed B^e = [I; -B] (the mild
// extended solution the approximations converge to). lambda_scale must be a
// positive real in the resolvent set (min_k |lambda_scale - lambda_k| > gap/2).
ExtendedTrajectory yosida_simulate(const PhsModel& model, const ModalBasis& basis,
                                   const BoundaryLift& lift, const ResolvedNoise& noise,
                                   const InputSignal& input, double lambda_scale,
                                   const TimeGrid& grid, Scheme scheme, uint64_t seed,
                                   uint64_t path_index, const Vec& u0, const CVec& x0);

// Deterministic ingredients of the extended simulation: the u-part trajectory
// and the modal forcing samples g_k(t) = a_k u(t) + c_k(lambda) u'(t).
struct YosidaForcing {
    Mat u_states;  // m x times
    CMat g;        // K x times
};
YosidaForcing yosida_forcing(const PhsModel& model, const ModalBasis& basis,
                             const BoundaryLift& lift, const InputSignal& input,
                             double lambda_scale, const Vec& times, const Vec& u0);

// Residual of the integral identity
//   X^e(t) - X^e(0) - int (A^e X^e + B^e_lambda u') ds - int H^e dw
// evaluated with trapezoid quadrature on the stored trajectory; the noise term
// is reconstructed from the same (seed, path) Brownian increments.
Vec extended_residual(const ExtendedTrajectory& traj, const PhsModel& model,
                      const ModalBasis& basis, const BoundaryLift& lift,
                      const ResolvedNoise& noise, const InputSignal& input,
                      double lambda_scale, uint64_t seed, uint64_t path_index);

Vec extended_residual_with_path(const ExtendedTrajectory& traj, const PhsModel& model,
                                const ModalBasis& basis, const BoundaryLift& lift,
                                const ResolvedNoise& noise, const InputSignal& input,
                                double lambda_scale, const BrownianPath& path);

// Extended-space squared norm |u|^2 + ||x||_X^2 of a trajectory column.
double extended_norm_sq(const ModalBasis& basis, const Vec& u_part, const CVec& x_part);

// ---------------------------------------------------------------------------

// Increment-scheme run consuming externally supplied Brownian increments;
// the refinement studies coarsen one fine path across several step sizes.
// forcing_samples, when given, are modal g samples at the path's times.
ModalTrajectory simulate_increment_with_path(const ModalBasis& basis,
                                             const ResolvedNoise& noise,
                                             const BrownianPath& path, const CVec& x0,
                                             const CMat* forcing_samples = nullptr);

// Residual time series of the weak-solution identity
//   <X(t),z> = <X0,z> + int [<X, A* z> + <ABu - Bu', z>] ds + <H w(t), z>
// for z = sum_l zbar-coefficients in the psi basis, on a stored full-resolution
// trajectory driven by (seed, path).
Vec weak_residual(const ModalTrajectory& traj, const CVec& z_psi_coeffs,
                  const ModalBasis& basis, const ResolvedNoise& noise,
                  const ForcingCoeffs* forcing, const InputSignal* input,
                  uint64_t seed, uint64_t path_index);

Vec weak_residual_with_path(const ModalTrajectory& traj, const CVec& z_psi_coeffs,
                            const ModalBasis& basis, const ResolvedNoise& noise,
                            const ForcingCoeffs* forcing, const InputSignal* input,
                            const BrownianPath& path);

}  // namespace sphs
