#pragma once

#include <vector>

#include "sphs/noise.hpp"
#include "sphs/solver.hpp"

namespace sphs {

// Exact first- and second-moment dynamics in modal coordinates, where the
// semigroup is diagonal and both closed forms are exact.

// m_k(t) = e^{lambda_k t} m_k(0) + int_0^t e^{lambda_k (t-s)} g_k(s) ds with
// g_k = <A B u - B udot, psi_k>; evaluated on the time grid with the same
// phi-rule steps as the simulator (a zero-noise mild run).
ModalTrajectory mean_trajectory(const PhsModel& model, const ModalBasis& basis,
                                const BoundaryLift* lift, const InputSignal* input,
                                const CVec& mean_x0, const TimeGrid& grid);

// P_kl(t) = e^{(l_k + conj l_l) t} Q0_kl + G_kl (e^{(l_k + conj l_l) t} - 1)/(l_k + conj l_l),
// G_kl = sum_i q_i h_ki conj(h_li); the removable singularity switches to
// t * G_kl when |l_k + conj l_l| < 1e-10. Q0 must be Hermitian PSD.
CMat covariance_exact(const ModalBasis& basis, const ResolvedNoise& noise,
                      const CMat& Q0_modal, double t);

// G_kl itself (the modal noise intensity matrix).
CMat modal_noise_matrix(const ModalBasis& basis, const ResolvedNoise& noise);

// Sample moments of an ensemble of modal states at one time point, reduced in
// deterministic (pairwise, path-index) order. standard errors:
//   mean: per-mode sd / sqrt(P); trace: sd over paths of ||x - mean||_2^2 / sqrt(P).
struct McMoments {
    int paths = 0;
    CVec mean;
    CMat covariance;      // unbiased sample covariance E[(x-m)(x-m)^H]
    Vec mean_se;          // per mode, |.|-scale standard error
    double cov_trace = 0.0;
    double cov_trace_se = 0.0;
};

McMoments mc_moments(const std::vector<CVec>& ensemble_states);

// Constant expected-energy drift injected by the noise:
//   (1/2) Tr[H_density H Q H*] = (1/2) sum_i q_i int (Hf_i)^T H_density (Hf_i).
double energy_rate(const PhsModel& model, const ResolvedNoise& noise, const Grid1D& grid);

// Hermitian PSD test with the relative slack min eig >= -1e-10 trace.
bool is_psd_modal(const CMat& P);

// Pairwise (tree) summation in fixed index order; used by every ensemble
// reduction so results do not depend on the worker count.
double pairwise_sum(const std::vector<double>& values);
cplx pairwise_sum(const std::vector<cplx>& values);

}  // namespace sphs
