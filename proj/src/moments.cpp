#include "sphs/moments.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace sphs {

namespace {
template <class T>
T pairwise_sum_impl(const std::vector<T>& v, size_t lo, size_t hi) {
    if (hi - lo <= 8) {
        T acc = T(0);
        for (size_t i = lo; i < hi; ++i) acc += v[i];
        return acc;
    }
    const size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum_impl(v, lo, mid) + pairwise_sum_impl(v, mid, hi);
}
}  // namespace

double pairwise_sum(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    return pairwise_sum_impl(values, 0, values.size());
}

cplx pairwise_sum(const std::vector<cplx>& values) {
    if (values.empty()) return cplx(0.0);
    return pairwise_sum_impl(values, 0, values.size());
}

ModalTrajectory mean_trajectory(const PhsModel& model, const ModalBasis& basis,
                                const BoundaryLift* lift, const InputSignal* input,
                                const CVec& mean_x0, const TimeGrid& grid) {
    ResolvedNoise quiet;
    quiet.q = Vec::Zero(1);
    quiet.coupling = CMat::Zero(basis.size(), 1);
    quiet.has_coupling = true;
    MildSimulator sim(model, basis, quiet, grid, Scheme::Increment, lift, input);
    return sim.run(0, 0, mean_x0);
}

CMat modal_noise_matrix(const ModalBasis& basis, const ResolvedNoise& noise) {
    if (!noise.has_coupling)
        throw ConfigError("modal_noise_matrix: noise not resolved against the basis");
    const int K = basis.size();
    CMat G = CMat::Zero(K, K);
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < K; ++l) {
            cplx acc = 0.0;
            for (int i = 0; i < noise.coupling.cols(); ++i)
                acc += noise.q[i] * noise.coupling(k, i) * std::conj(noise.coupling(l, i));
            G(k, l) = acc;
        }
    return G;
}

bool is_psd_modal(const CMat& P) {
    Eigen::SelfAdjointEigenSolver<CMat> es(P);
    const double tr = std::abs(P.trace());
    return es.eigenvalues().minCoeff() >= -1e-10 * std::max(tr, 1e-300);
}

CMat covariance_exact(const ModalBasis& basis, const ResolvedNoise& noise,
                      const CMat& Q0_modal, double t) {
    const int K = basis.size();
    CMat Q0 = Q0_modal;
    if (Q0.size() == 0) Q0 = CMat::Zero(K, K);
    if (Q0.rows() != K || Q0.cols() != K)
        throw ConfigError("covariance_exact: Q0 must be K x K");
    if ((Q0 - Q0.adjoint()).norm() > 1e-10 * std::max(1.0, Q0.norm()) || !is_psd_modal(Q0))
        throw ConfigError("covariance_exact: Q0 must be Hermitian PSD");

    const CMat G = modal_noise_matrix(basis, noise);
    CMat P(K, K);
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < K; ++l) {
            const cplx z = basis.lambda(k) + std::conj(basis.lambda(l));
            const cplx ezt = std::exp(z * t);
            const cplx grow = (std::abs(z) < 1e-10) ? cplx(t, 0.0) : (ezt - 1.0) / z;
            P(k, l) = ezt * Q0(k, l) + G(k, l) * grow;
        }
    return P;
}

McMoments mc_moments(const std::vector<CVec>& ensemble_states) {
    const int P = int(ensemble_states.size());
    if (P < 2) throw ConfigError("mc_moments: need at least 2 paths");
    const int K = int(ensemble_states[0].size());

    McMoments out;
    out.paths = P;
    out.mean.resize(K);
    std::vector<cplx> buf(P);
    for (int k = 0; k < K; ++k) {
        for (int p = 0; p < P; ++p) buf[p] = ensemble_states[p][k];
        out.mean[k] = pairwise_sum(buf) / double(P);
    }

    out.covariance = CMat::Zero(K, K);
    std::vector<cplx> cbuf(P);
    for (int k = 0; k < K; ++k)
        for (int l = 0; l <= k; ++l) {
            for (int p = 0; p < P; ++p)
                cbuf[p] = (ensemble_states[p][k] - out.mean[k]) *
                          std::conj(ensemble_states[p][l] - out.mean[l]);
            const cplx c = pairwise_sum(cbuf) / double(P - 1);
            out.covariance(k, l) = c;
            out.covariance(l, k) = std::conj(c);
        }

    out.mean_se.resize(K);
    for (int k = 0; k < K; ++k)
        out.mean_se[k] = std::sqrt(out.covariance(k, k).real() / double(P));

    // trace statistics from the per-path squared deviations
    std::vector<double> dev(P);
    for (int p = 0; p < P; ++p)
        dev[p] = (ensemble_states[p] - out.mean).squaredNorm();
    const double mean_dev = pairwise_sum(dev) / double(P);
    out.cov_trace = mean_dev * double(P) / double(P - 1);
    std::vector<double> dev2(P);
    for (int p = 0; p < P; ++p) dev2[p] = (dev[p] - mean_dev) * (dev[p] - mean_dev);
    const double var_dev = pairwise_sum(dev2) / double(P - 1);
    out.cov_trace_se = std::sqrt(var_dev / double(P));
    return out;
}

double energy_rate(const PhsModel& model, const ResolvedNoise& noise, const Grid1D& grid) {
    return 0.5 * weighted_trace(noise, model.H_nodes(grid), grid);
}

}  // namespace sphs
