#include "sphs/solver.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace sphs {

InputSignal InputSignal::zero(int m) {
    InputSignal s;
    s.m = m;
    s.u = [m](double) { return Vec::Zero(m); };
    s.udot = [m](double) { return Vec::Zero(m); };
    return s;
}

InputSignal InputSignal::constant(Vec value) {
    InputSignal s;
    s.m = int(value.size());
    s.u = [value](double) { return value; };
    s.udot = [m = s.m](double) { return Vec::Zero(m); };
    return s;
}

InputSignal InputSignal::sine(Vec amp, Vec omega, Vec phase) {
    if (amp.size() != omega.size() || amp.size() != phase.size())
        throw ConfigError("input signal: amp/omega/phase sizes differ");
    InputSignal s;
    s.m = int(amp.size());
    s.u = [=](double t) {
        Vec v(amp.size());
        for (int j = 0; j < amp.size(); ++j) v[j] = amp[j] * std::sin(omega[j] * t + phase[j]);
        return v;
    };
    s.udot = [=](double t) {
        Vec v(amp.size());
        for (int j = 0; j < amp.size(); ++j)
            v[j] = amp[j] * omega[j] * std::cos(omega[j] * t + phase[j]);
        return v;
    };
    return s;
}

Vec TimeGrid::times() const {
    Vec t(steps + 1);
    for (int s = 0; s <= steps; ++s) t[s] = s * dt;
    return t;
}

cplx phi1(cplx z) {
    if (std::abs(z) < 1e-4)
        return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
    return (std::exp(z) - 1.0) / z;
}

cplx phi2(cplx z) {
    if (std::abs(z) < 1e-4)
        return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0;
    return (std::exp(z) - 1.0 - z) / (z * z);
}

ForcingCoeffs lift_forcing_coeffs(const PhsModel& model, const ModalBasis& basis,
                                  const BoundaryLift& lift) {
    const Grid1D& grid = basis.grid();
    const int K = basis.size();
    const int m = model.inputs();
    ForcingCoeffs fc;
    fc.a.resize(K, m);
    fc.b.resize(K, m);
    for (int j = 0; j < m; ++j) {
        const GridFn Bj = lift.column_on_grid(grid, j);
        const GridFn ABj = apply_raw_generator(model, grid, Bj);
        const CGridFn Bc = Bj.cast<cplx>();
        const CGridFn ABc = ABj.cast<cplx>();
        for (int k = 0; k < K; ++k) {
            fc.a(k, j) = basis.coeff(ABc, k);
            fc.b(k, j) = basis.coeff(Bc, k);
        }
    }
    return fc;
}

namespace {

// g samples (K x steps+1) of <A B u - B udot, psi_k> on the time grid.
CMat forcing_samples(const ForcingCoeffs& fc, const InputSignal& input,
                     const TimeGrid& grid, bool* used_fd) {
    const int K = int(fc.a.rows());
    const int S = grid.steps;
    Mat u_samples(input.m, S + 1), ud_samples(input.m, S + 1);
    for (int s = 0; s <= S; ++s) u_samples.col(s) = input.u(s * grid.dt);
    if (input.analytic_derivative()) {
        for (int s = 0; s <= S; ++s) ud_samples.col(s) = input.udot(s * grid.dt);
        *used_fd = false;
    } else {
        // second-order central differences, one-sided at the ends
        const double h = grid.dt;
        for (int s = 1; s < S; ++s)
            ud_samples.col(s) = (u_samples.col(s + 1) - u_samples.col(s - 1)) / (2 * h);
        ud_samples.col(0) =
            (-3.0 * u_samples.col(0) + 4.0 * u_samples.col(1) - u_samples.col(2)) / (2 * h);
        ud_samples.col(S) = (3.0 * u_samples.col(S) - 4.0 * u_samples.col(S - 1) +
                             u_samples.col(S - 2)) /
                            (2 * h);
        *used_fd = true;
    }
    CMat g(K, S + 1);
    for (int s = 0; s <= S; ++s)
        g.col(s) = fc.a * u_samples.col(s).cast<cplx>() -
                   fc.b * ud_samples.col(s).cast<cplx>();
    return g;
}

}  // namespace

MildSimulator::MildSimulator(const PhsModel& model, const ModalBasis& basis,
                             const ResolvedNoise& noise, const TimeGrid& grid,
                             Scheme scheme, const BoundaryLift* lift,
                             const InputSignal* input)
    : basis_(&basis), grid_(grid), scheme_(scheme), K_(basis.size()) {
    if (!(grid.dt > 0.0) || grid.steps < 1)
        throw ConfigError("simulate: need dt > 0 and at least one step");
    if (!noise.has_coupling)
        throw ConfigError("simulate: noise must be resolved against the modal basis");
    h_ = noise.coupling;
    nq_ = noise.q;
    if (lift && input) {
        const ForcingCoeffs fc = lift_forcing_coeffs(model, basis, *lift);
        const CMat g = forcing_samples(fc, *input, grid_, &fd_udot_);
        forcing_step_.resize(K_, grid_.steps);
        for (int k = 0; k < K_; ++k) {
            const cplx z = basis.lambda(k) * grid_.dt;
            const cplx w0 = grid_.dt * (phi1(z) - phi2(z));
            const cplx w1 = grid_.dt * phi2(z);
            for (int s = 0; s < grid_.steps; ++s)
                forcing_step_(k, s) = w0 * g(k, s) + w1 * g(k, s + 1);
        }
        has_forcing_ = true;
    }
    finish_setup(model);
}

MildSimulator::MildSimulator(const PhsModel& model, const ModalBasis& basis,
                             const ResolvedNoise& noise, const TimeGrid& grid,
                             Scheme scheme, CMat forcing_samples_in)
    : basis_(&basis), grid_(grid), scheme_(scheme), K_(basis.size()) {
    if (!(grid.dt > 0.0) || grid.steps < 1)
        throw ConfigError("simulate: need dt > 0 and at least one step");
    if (!noise.has_coupling)
        throw ConfigError("simulate: noise must be resolved against the modal basis");
    h_ = noise.coupling;
    nq_ = noise.q;
    if (forcing_samples_in.size() > 0) {
        if (forcing_samples_in.rows() != K_ || forcing_samples_in.cols() != grid.steps + 1)
            throw ConfigError("simulate: forcing samples must be K x (steps+1)");
        forcing_step_.resize(K_, grid_.steps);
        for (int k = 0; k < K_; ++k) {
            const cplx z = basis.lambda(k) * grid_.dt;
            const cplx w0 = grid_.dt * (phi1(z) - phi2(z));
            const cplx w1 = grid_.dt * phi2(z);
            for (int s = 0; s < grid_.steps; ++s)
                forcing_step_(k, s) =
                    w0 * forcing_samples_in(k, s) + w1 * forcing_samples_in(k, s + 1);
        }
        has_forcing_ = true;
    }
    finish_setup(model);
}

void MildSimulator::finish_setup(const PhsModel&) {
    decay_.resize(K_);
    for (int k = 0; k < K_; ++k) decay_[k] = std::exp(basis_->lambda(k) * grid_.dt);

    if (scheme_ == Scheme::ExactGaussian) {
        // Covariance C and pseudo-covariance R of the per-step convolution
        // increment; the real-stacked [Re; Im] Gaussian is what gets sampled.
        const int K = K_;
        CMat C = CMat::Zero(K, K), R = CMat::Zero(K, K);
        for (int k = 0; k < K; ++k)
            for (int l = 0; l < K; ++l) {
                cplx gc = 0.0, gr = 0.0;
                for (int i = 0; i < h_.cols(); ++i) {
                    gc += nq_[i] * h_(k, i) * std::conj(h_(l, i));
                    gr += nq_[i] * h_(k, i) * h_(l, i);
                }
                const cplx zc = basis_->lambda(k) + std::conj(basis_->lambda(l));
                const cplx zr = basis_->lambda(k) + basis_->lambda(l);
                const cplx ic = (std::abs(zc) * grid_.dt < 1e-8)
                                    ? cplx(grid_.dt, 0.0)
                                    : (std::exp(zc * grid_.dt) - 1.0) / zc;
                const cplx ir = (std::abs(zr) * grid_.dt < 1e-8)
                                    ? cplx(grid_.dt, 0.0)
                                    : (std::exp(zr * grid_.dt) - 1.0) / zr;
                C(k, l) = gc * ic;
                R(k, l) = gr * ir;
            }
        Mat sigma(2 * K, 2 * K);
        sigma.topLeftCorner(K, K) = 0.5 * (C + R).real();
        sigma.bottomRightCorner(K, K) = 0.5 * (C - R).real();
        for (int k = 0; k < K; ++k)
            for (int l = 0; l < K; ++l) {
                sigma(k, K + l) = 0.5 * (R(k, l).imag() - C(k, l).imag());
                sigma(K + k, l) = 0.5 * (R(k, l).imag() + C(k, l).imag());
            }
        sigma = 0.5 * (sigma + sigma.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
        if (es.info() != Eigen::Success)
            throw NumericalError("simulate: covariance factorization failed");
        Vec d = es.eigenvalues();
        const double dmax = std::max(d.maxCoeff(), 0.0);
        if (d.minCoeff() < -1e-12 * std::max(1.0, dmax))
            throw NumericalError("simulate: step covariance is not PSD beyond the "
                                 "1e-12 jitter budget");
        for (int i = 0; i < d.size(); ++i) d[i] = std::sqrt(std::max(d[i], 0.0));
        cov_factor_ = es.eigenvectors() * d.asDiagonal();
    }
}

ModalTrajectory MildSimulator::run(uint64_t seed, uint64_t path_index,
                                   const CVec& x0) const {
    ModalTrajectory traj;
    traj.times = grid_.times();
    traj.states.resize(K_, grid_.steps + 1);
    run_with(seed, path_index, x0,
             [&](int s, double, const CVec& x) { traj.states.col(s) = x; });
    return traj;
}

void check_compatibility(const GridFn& eps0, const PhsModel& model,
                         const InputSignal& input, double tol) {
    const Vec u0 = input.u(0.0);
    const Vec b_eps0 = input_functional(eps0, model);
    const double defect = (u0 - b_eps0).norm();
    if (defect > tol * std::max(1.0, u0.norm()))
        throw ConfigError("compatibility u(0) = B[eps0] violated (defect " +
                          std::to_string(defect) + ")");
}

ReconstructionResult reconstruct_epsilon(const ModalTrajectory& traj,
                                         const ModalBasis& basis, const PhsModel& model,
                                         const BoundaryLift* lift,
                                         const InputSignal* input, bool keep_fields) {
    if (lift && !input)
        throw ConfigError("reconstruct_epsilon: lift given but no input signal");
    const int T = int(traj.times.size());
    const Grid1D& grid = basis.grid();
    const auto Hn = basis.H_nodes();

    ReconstructionResult out;
    out.times = traj.times;
    out.energies.resize(T);
    out.outputs.resize(model.outputs(), T);
    if (keep_fields) out.fields.reserve(T);

    std::vector<GridFn> lift_cols;
    if (lift)
        for (int j = 0; j < model.inputs(); ++j)
            lift_cols.push_back(lift->column_on_grid(grid, j));

    for (int s = 0; s < T; ++s) {
        const CVec x = traj.states.col(s);
        CGridFn field = basis.reconstruct(x);
        if (lift) {
            const Vec u = input->u(traj.times[s]);
            for (int j = 0; j < model.inputs(); ++j)
                field += (u[j] * lift_cols[j]).cast<cplx>();
        }
        out.max_imag_residual =
            std::max(out.max_imag_residual, field.imag().cwiseAbs().maxCoeff());
        GridFn real_field = field.real();
        out.energies[s] = inner_energy(real_field, real_field, grid, Hn);
        out.outputs.col(s) = output_functional(real_field, model);
        if (keep_fields) out.fields.push_back(std::move(real_field));
    }
    return out;
}

CVec convolution_series(const ModalBasis& basis, const ResolvedNoise& noise,
                        const BrownianPath& path, double t) {
    if (!noise.has_coupling)
        throw ConfigError("convolution_series: noise must be resolved against the basis");
    const int S = int(path.dW.rows());
    int idx = -1;
    for (int s = 0; s <= S; ++s)
        if (std::abs(path.times[s] - t) <= 1e-12 * std::max(1.0, std::abs(t))) idx = s;
    if (idx < 0) throw ConfigError("convolution_series: t must lie on the path grid");

    const Mat beta = path.cumulative();
    const int K = basis.size();
    const int I = int(noise.q.size());
    CVec w = CVec::Zero(K);
    for (int k = 0; k < K; ++k) {
        const cplx lam = basis.lambda(k);
        for (int i = 0; i < I; ++i) {
            // trapezoid of e^{lambda (t-s)} beta_i(s) over [0, t]
            cplx integral = 0.0;
            for (int s = 0; s < idx; ++s) {
                const double h = path.times[s + 1] - path.times[s];
                integral += 0.5 * h *
                            (std::exp(lam * (t - path.times[s])) * beta(s, i) +
                             std::exp(lam * (t - path.times[s + 1])) * beta(s + 1, i));
            }
            w[k] += noise.coupling(k, i) * (beta(idx, i) + lam * integral);
        }
    }
    return w;
}

// ---------------------------------------------------------------------------
// Extended system

namespace {
CVec resolvent_control_coeffs(const ForcingCoeffs& fc, const CVec& lambdas,
                              double lambda_scale, int channel) {
    const int K = int(fc.a.rows());
    CVec c(K);
    for (int k = 0; k < K; ++k) {
        if (std::isinf(lambda_scale)) {
            c[k] = -fc.b(k, channel);
        } else {
            c[k] = (fc.a(k, channel) - lambda_scale * fc.b(k, channel)) /
                   (lambda_scale - lambdas[k]);
        }
    }
    return c;
}
}  // namespace

YosidaForcing yosida_forcing(const PhsModel& model, const ModalBasis& basis,
                             const BoundaryLift& lift, const InputSignal& input,
                             double lambda_scale, const Vec& times, const Vec& u0) {
    if (!std::isinf(lambda_scale)) {
        if (!(lambda_scale > 0.0))
            throw ConfigError("yosida: lambda_scale must be positive real");
        double dist = std::numeric_limits<double>::infinity();
        for (int k = 0; k < basis.size(); ++k)
            dist = std::min(dist, std::abs(lambda_scale - basis.lambda(k)));
        const double thresh = std::isfinite(basis.gap()) ? 0.5 * basis.gap() : 0.0;
        if (!(dist > thresh))
            throw ConfigError("yosida: lambda_scale too close to the spectrum");
    }
    if (!input.analytic_derivative())
        throw ConfigError("yosida: the extended system integrates udot; supply an "
                          "analytic derivative");
    const int m = model.inputs();
    const int K = basis.size();
    const int S = int(times.size()) - 1;

    YosidaForcing out;
    // u-part evolves du = udot dt: trapezoid cumulative (deterministic).
    out.u_states.resize(m, S + 1);
    out.u_states.col(0) = u0;
    for (int s = 0; s < S; ++s) {
        const Vec d0 = input.udot(times[s]);
        const Vec d1 = input.udot(times[s + 1]);
        out.u_states.col(s + 1) =
            out.u_states.col(s) + 0.5 * (times[s + 1] - times[s]) * (d0 + d1);
    }

    // x-part forcing g_k(t) = a_k u_state(t) + c_k udot(t)
    const ForcingCoeffs fc = lift_forcing_coeffs(model, basis, lift);
    out.g = CMat::Zero(K, S + 1);
    for (int j = 0; j < m; ++j) {
        const CVec c = resolvent_control_coeffs(fc, basis.lambdas(), lambda_scale, j);
        for (int s = 0; s <= S; ++s) {
            const Vec ud = input.udot(times[s]);
            out.g.col(s) += fc.a.col(j) * out.u_states(j, s) + c * ud[j];
        }
    }
    return out;
}

ExtendedTrajectory yosida_simulate(const PhsModel& model, const ModalBasis& basis,
                                   const BoundaryLift& lift, const ResolvedNoise& noise,
                                   const InputSignal& input, double lambda_scale,
                                   const TimeGrid& grid, Scheme scheme, uint64_t seed,
                                   uint64_t path_index, const Vec& u0, const CVec& x0) {
    YosidaForcing yf =
        yosida_forcing(model, basis, lift, input, lambda_scale, grid.times(), u0);
    MildSimulator sim(model, basis, noise, grid, scheme, std::move(yf.g));
    const ModalTrajectory traj = sim.run(seed, path_index, x0);

    ExtendedTrajectory ext;
    ext.times = traj.times;
    ext.u_states = std::move(yf.u_states);
    ext.x_states = traj.states;
    return ext;
}

double extended_norm_sq(const ModalBasis& basis, const Vec& u_part, const CVec& x_part) {
    return u_part.squaredNorm() + basis.modal_norm_sq(x_part);
}

Vec extended_residual(const ExtendedTrajectory& traj, const PhsModel& model,
                      const ModalBasis& basis, const BoundaryLift& lift,
                      const ResolvedNoise& noise, const InputSignal& input,
                      double lambda_scale, uint64_t seed, uint64_t path_index) {
    return extended_residual_with_path(traj, model, basis, lift, noise, input,
                                       lambda_scale,
                                       sample_path(noise, traj.times, seed, path_index));
}

Vec extended_residual_with_path(const ExtendedTrajectory& traj, const PhsModel& model,
                                const ModalBasis& basis, const BoundaryLift& lift,
                                const ResolvedNoise& noise, const InputSignal& input,
                                double lambda_scale, const BrownianPath& bp) {
    const int S = int(traj.times.size()) - 1;
    const int K = basis.size();
    const int m = model.inputs();

    const ForcingCoeffs fc = lift_forcing_coeffs(model, basis, lift);
    std::vector<CVec> cres;
    for (int j = 0; j < m; ++j)
        cres.push_back(resolvent_control_coeffs(fc, basis.lambdas(), lambda_scale, j));

    const Mat beta = bp.cumulative();

    // integrand of the drift: A^e X^e + B^e_lambda udot
    Mat drift_u(m, S + 1);
    CMat drift_x(K, S + 1);
    for (int s = 0; s <= S; ++s) {
        const Vec ud = input.udot(traj.times[s]);
        drift_u.col(s) = ud;
        CVec dx = basis.lambdas().cwiseProduct(traj.x_states.col(s));
        for (int j = 0; j < m; ++j)
            dx += fc.a.col(j) * traj.u_states(j, s) + cres[j] * ud[j];
        drift_x.col(s) = dx;
    }

    Vec res(S + 1);
    res[0] = 0.0;
    Vec int_u = Vec::Zero(m);
    CVec int_x = CVec::Zero(K);
    for (int s = 1; s <= S; ++s) {
        const double h = traj.times[s] - traj.times[s - 1];
        int_u += 0.5 * h * (drift_u.col(s - 1) + drift_u.col(s));
        int_x += 0.5 * h * (drift_x.col(s - 1) + drift_x.col(s));
        CVec noise_x = CVec::Zero(K);
        for (int i = 0; i < int(noise.q.size()); ++i)
            noise_x += noise.coupling.col(i) * beta(s, i);
        const Vec ru = traj.u_states.col(s) - traj.u_states.col(0) - int_u;
        const CVec rx =
            traj.x_states.col(s) - traj.x_states.col(0) - int_x - noise_x;
        res[s] = std::sqrt(extended_norm_sq(basis, ru, rx));
    }
    return res;
}

ModalTrajectory simulate_increment_with_path(const ModalBasis& basis,
                                             const ResolvedNoise& noise,
                                             const BrownianPath& path, const CVec& x0,
                                             const CMat* forcing_samples) {
    if (!noise.has_coupling)
        throw ConfigError("simulate: noise must be resolved against the modal basis");
    const int K = basis.size();
    const int S = int(path.dW.rows());
    const int I = int(path.dW.cols());
    if (forcing_samples &&
        (forcing_samples->rows() != K || forcing_samples->cols() != S + 1))
        throw ConfigError("simulate: forcing samples must be K x (steps+1)");

    ModalTrajectory traj;
    traj.times = path.times;
    traj.states.resize(K, S + 1);
    CVec x = x0;
    traj.states.col(0) = x;
    for (int s = 0; s < S; ++s) {
        const double dt = path.times[s + 1] - path.times[s];
        for (int k = 0; k < K; ++k) {
            const cplx decay = std::exp(basis.lambda(k) * dt);
            cplx noise_k = 0.0;
            for (int i = 0; i < I; ++i) noise_k += noise.coupling(k, i) * path.dW(s, i);
            cplx next = decay * x[k] + decay * noise_k;
            if (forcing_samples) {
                const cplx z = basis.lambda(k) * dt;
                next += dt * ((phi1(z) - phi2(z)) * (*forcing_samples)(k, s) +
                              phi2(z) * (*forcing_samples)(k, s + 1));
            }
            x[k] = next;
        }
        traj.states.col(s + 1) = x;
    }
    return traj;
}

Vec weak_residual(const ModalTrajectory& traj, const CVec& z_psi_coeffs,
                  const ModalBasis& basis, const ResolvedNoise& noise,
                  const ForcingCoeffs* forcing, const InputSignal* input,
                  uint64_t seed, uint64_t path_index) {
    return weak_residual_with_path(traj, z_psi_coeffs, basis, noise, forcing, input,
                                   sample_path(noise, traj.times, seed, path_index));
}

Vec weak_residual_with_path(const ModalTrajectory& traj, const CVec& z_psi_coeffs,
                            const ModalBasis& basis, const ResolvedNoise& noise,
                            const ForcingCoeffs* forcing, const InputSignal* input,
                            const BrownianPath& bp) {
    const int S = int(traj.times.size()) - 1;
    const int K = basis.size();
    if (z_psi_coeffs.size() != K)
        throw ConfigError("weak_residual: z must be expanded in the psi basis");

    const Mat beta = bp.cumulative();

    // <X(s), A* z> = sum_l lambda_l conj(z_l) x_l(s); <ABu - Bu', z> likewise.
    if (forcing && input && !input->analytic_derivative())
        throw ConfigError("weak_residual: input must carry an analytic derivative");
    CVec integrand(S + 1);
    for (int s = 0; s <= S; ++s) {
        cplx v = 0.0;
        for (int l = 0; l < K; ++l)
            v += basis.lambda(l) * std::conj(z_psi_coeffs[l]) * traj.states(l, s);
        if (forcing && input) {
            const Vec u = input->u(traj.times[s]);
            const Vec ud = input->udot(traj.times[s]);
            for (int l = 0; l < K; ++l) {
                cplx g = 0.0;
                for (int j = 0; j < input->m; ++j)
                    g += forcing->a(l, j) * u[j] - forcing->b(l, j) * ud[j];
                v += std::conj(z_psi_coeffs[l]) * g;
            }
        }
        integrand[s] = v;
    }

    auto pairing = [&](int s) {
        cplx v = 0.0;
        for (int l = 0; l < K; ++l)
            v += std::conj(z_psi_coeffs[l]) * traj.states(l, s);
        return v;
    };
    auto noise_pairing = [&](int s) {
        cplx v = 0.0;
        for (int l = 0; l < K; ++l) {
            cplx hw = 0.0;
            for (int i = 0; i < int(noise.q.size()); ++i)
                hw += noise.coupling(l, i) * beta(s, i);
            v += std::conj(z_psi_coeffs[l]) * hw;
        }
        return v;
    };

    Vec res(S + 1);
    res[0] = 0.0;
    cplx integral = 0.0;
    const cplx x0z = pairing(0);
    for (int s = 1; s <= S; ++s) {
        integral += 0.5 * (traj.times[s] - traj.times[s - 1]) *
                    (integrand[s - 1] + integrand[s]);
        const cplx lhs = pairing(s);
        const cplx rhs = x0z + integral + noise_pairing(s);
        res[s] = std::abs(lhs - rhs);
    }
    return res;
}

}  // namespace sphs
