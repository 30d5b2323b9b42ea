#include "sphs/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "sphs/ensemble.hpp"
#include "sphs/rng.hpp"

namespace sphs {

double loglog_slope(const Vec& x, const Vec& y) {
    std::vector<double> lx, ly;
    for (int i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    const int n = int(lx.size());
    if (n < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) return 0.0;
    return (n * sxy - sx * sy) / denom;
}

// ---------------------------------------------------------------------------

ItoIsometryReport ito_isometry_check(const PhsModel& model, const ModalBasis& basis,
                                     const ResolvedNoise& noise, double t, int steps,
                                     int paths, uint64_t seed, int workers) {
    if (paths < 1000) throw ConfigError("ito check: need at least 10^3 paths");
    ItoIsometryReport rep;
    rep.paths = paths;
    rep.t = t;

    const Grid1D& grid = basis.grid();
    const int I = int(noise.q.size());

    // flat integral int_0^t H dw = sum_i beta_i(t) Hf_i
    CMat gram_f(I, I);
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < I; ++j)
            gram_f(i, j) =
                inner_energy(noise.profiles[j].cast<cplx>().eval(),
                             noise.profiles[i].cast<cplx>().eval(), grid, basis.H_nodes());
    rep.flat_expected = t * hs_norm_sq(noise, model, grid);

    const Vec times = TimeGrid{t / steps, steps}.times();
    std::vector<double> flat_vals(paths);
    parallel_paths(paths, workers, [&](int64_t p) {
        std::vector<double> dw(I);
        Vec beta = Vec::Zero(I);
        for (int s = 0; s < steps; ++s) {
            brownian_increments(noise.q, t / steps, seed, uint64_t(p), s, dw.data());
            for (int i = 0; i < I; ++i) beta[i] += dw[i];
        }
        const CVec bc = beta.cast<cplx>();
        flat_vals[size_t(p)] = (bc.adjoint() * gram_f * bc)(0).real();
    });
    const double mean_flat = pairwise_sum(flat_vals) / paths;
    std::vector<double> dev(paths);
    for (int p = 0; p < paths; ++p)
        dev[p] = (flat_vals[p] - mean_flat) * (flat_vals[p] - mean_flat);
    rep.flat_mc = mean_flat;
    rep.flat_se = std::sqrt(pairwise_sum(dev) / (paths - 1) / paths);
    rep.flat_ok = std::abs(rep.flat_mc - rep.flat_expected) <= 3.0 * rep.flat_se;

    // stochastic convolution: modal covariance trace vs the Lyapunov form
    const TimeGrid tg{t / steps, steps};
    MildSimulator sim(model, basis, noise, tg, Scheme::ExactGaussian);
    const CVec x0 = CVec::Zero(basis.size());
    std::vector<CVec> endpoints(paths);
    parallel_paths(paths, workers, [&](int64_t p) {
        CVec last;
        sim.run_with(seed, uint64_t(p), x0, [&](int s, double, const CVec& x) {
            if (s == tg.steps) last = x;
        });
        endpoints[size_t(p)] = std::move(last);
    });
    const McMoments mm = mc_moments(endpoints);
    const CMat P = covariance_exact(basis, noise, CMat(), t);
    rep.conv_mc = mm.cov_trace;
    rep.conv_se = mm.cov_trace_se;
    rep.conv_expected = P.trace().real();
    rep.conv_ok = std::abs(rep.conv_mc - rep.conv_expected) <= 3.0 * rep.conv_se;
    return rep;
}

// ---------------------------------------------------------------------------

namespace {
std::vector<int> clean_checkpoints(std::vector<int> cps, int K_max) {
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    std::vector<int> out;
    for (int c : cps)
        if (c >= 1 && c <= K_max) out.push_back(c);
    if (out.size() < 2)
        throw ConfigError("admissibility: need at least two checkpoints within range");
    return out;
}
}  // namespace

AdmissibilityReport admissibility_integral(const CVec& lambdas, const CMat& coupling,
                                           const Vec& q, double t,
                                           const std::vector<int>& checkpoints,
                                           double tail_tol) {
    const int K = int(lambdas.size());
    if (coupling.rows() != K || coupling.cols() != q.size())
        throw ConfigError("admissibility: coupling must be K x I");
    AdmissibilityReport rep;
    rep.t = t;
    rep.tail_tol = tail_tol;
    rep.checkpoints = clean_checkpoints(checkpoints, K);

    Vec term(K);
    for (int k = 0; k < K; ++k) {
        const double re = lambdas[k].real();
        const double mag2 = std::norm(lambdas[k]);
        const double timefac =
            (std::abs(re) < 1e-14) ? t : (std::exp(2.0 * re * t) - 1.0) / (2.0 * re);
        double channel_sum = 0.0;
        for (int i = 0; i < q.size(); ++i)
            channel_sum += q[i] * std::norm(coupling(k, i));
        term[k] = channel_sum * mag2 * timefac;
    }
    rep.partial_sums.resize(int(rep.checkpoints.size()));
    for (size_t c = 0; c < rep.checkpoints.size(); ++c) {
        double s = 0.0;
        for (int k = 0; k < rep.checkpoints[c]; ++k) s += term[k];
        rep.partial_sums[int(c)] = s;
    }
    const int last = int(rep.checkpoints.size()) - 1;
    const double s_last = rep.partial_sums[last];
    const double s_prev = rep.partial_sums[last - 1];
    rep.tail_ratio = (s_last > 0.0) ? (s_last - s_prev) / s_last : 0.0;
    Vec kx(int(rep.checkpoints.size()));
    for (size_t c = 0; c < rep.checkpoints.size(); ++c) kx[int(c)] = rep.checkpoints[c];
    rep.growth_exponent = loglog_slope(kx, rep.partial_sums);
    rep.convergent = rep.tail_ratio <= tail_tol;
    return rep;
}

HsDomainReport hs_domain_check(const CVec& lambdas, const CMat& coupling, const Vec& q,
                               const std::vector<int>& checkpoints, double tail_tol) {
    const int K = int(lambdas.size());
    if (coupling.rows() != K || coupling.cols() != q.size())
        throw ConfigError("hs_domain: coupling must be K x I");
    HsDomainReport rep;
    rep.tail_tol = tail_tol;
    rep.checkpoints = clean_checkpoints(checkpoints, K);
    Vec term(K);
    for (int k = 0; k < K; ++k) {
        double channel_sum = 0.0;
        for (int i = 0; i < q.size(); ++i)
            channel_sum += q[i] * std::norm(coupling(k, i));
        term[k] = channel_sum * std::norm(lambdas[k]);
    }
    rep.partial_sums.resize(int(rep.checkpoints.size()));
    for (size_t c = 0; c < rep.checkpoints.size(); ++c) {
        double s = 0.0;
        for (int k = 0; k < rep.checkpoints[c]; ++k) s += term[k];
        rep.partial_sums[int(c)] = s;
    }
    const int last = int(rep.checkpoints.size()) - 1;
    const double s_last = rep.partial_sums[last];
    rep.tail_ratio =
        (s_last > 0.0) ? (s_last - rep.partial_sums[last - 1]) / s_last : 0.0;
    rep.finite = rep.tail_ratio <= tail_tol;
    return rep;
}

void extend_string_spectrum(const ModalBasis& basis, const ResolvedNoise& noise,
                            const QWienerSpec& spec, const StringParams& params,
                            int K_max, CVec* lambdas_out, CMat* coupling_out) {
    if (spec.kind() != QWienerSpec::Kind::ModalPairs &&
        spec.kind() != QWienerSpec::Kind::ModalFlat)
        throw ConfigError("extend_string_spectrum: extension beyond the computed basis "
                          "is only defined for modal noise rules");
    const int Kb = basis.size();
    if (K_max < Kb) K_max = Kb;
    const StringSpectrumResult oracle =
        string_spectrum_oracle(params.rho, params.T_modulus, params.a, params.b, K_max);
    if (oracle.degenerate)
        throw NumericalError("extend_string_spectrum: degenerate (matched impedance)");

    lambdas_out->resize(K_max);
    for (int k = 0; k < Kb; ++k) (*lambdas_out)[k] = basis.lambda(k);
    for (int k = Kb; k < K_max && k < oracle.roots.size(); ++k)
        (*lambdas_out)[k] = oracle.roots[k];

    const int I = int(noise.q.size());
    coupling_out->resize(K_max, I);
    coupling_out->setZero();
    coupling_out->topRows(Kb) = noise.coupling;
    if (spec.kind() == QWienerSpec::Kind::ModalFlat)
        coupling_out->bottomRows(K_max - Kb).setConstant(cplx(spec.flat_coupling(), 0.0));
}

// ---------------------------------------------------------------------------

namespace {

// Deterministic pseudo-random but conjugate-consistent modal coefficients.
CVec random_modal_state(const ModalBasis& basis, uint64_t seed, uint64_t tag,
                        double amp, double decay_rate) {
    const int K = basis.size();
    CVec x0(K);
    for (int k = 0; k < K; ++k) {
        const cplx lam = basis.lambda(k);
        if (lam.imag() < -1e-12) {
            // conjugate partner of the preceding head
            x0[k] = std::conj(x0[k - 1]);
            continue;
        }
        const double z0 = rng::normal(seed, tag, uint32_t(k), rng::kSetupStream, 0);
        const double z1 = rng::normal(seed, tag, uint32_t(k), rng::kSetupStream, 1);
        const double w = amp / std::pow(1.0 + std::abs(lam.imag()), decay_rate);
        x0[k] = (std::abs(lam.imag()) <= 1e-12) ? cplx(w * z0, 0.0)
                                                : cplx(w * z0, w * z1);
    }
    return x0;
}

}  // namespace

WellposednessReport wellposedness_ratio(const PhsModel& model, const ModalBasis& basis,
                                        const BoundaryLift& lift,
                                        const ResolvedNoise& noise,
                                        const QWienerSpec& spec,
                                        const WellposednessOptions& opt) {
    WellposednessReport rep;
    const int H = int(opt.tf_grid.size());
    if (H < 2) throw ConfigError("wellposedness: need at least two horizons");
    rep.tf_grid.resize(H);
    for (int i = 0; i < H; ++i) rep.tf_grid[i] = opt.tf_grid[i];

    // structural hypotheses behind the well-posedness claim
    rep.conditions["generation_psd"] = generation_check(model).psd;
    try {
        factorize_flux(model, basis.grid());
        rep.conditions["flux_factorization"] = true;
    } catch (const NumericalError&) {
        rep.conditions["flux_factorization"] = false;
    }
    {
        const int K = basis.size();
        std::vector<int> cps{K / 4, K / 2, 3 * K / 4, K};
        const auto hs = hs_domain_check(basis.lambdas(), noise.coupling, noise.q, cps, 1.0);
        const auto ad = admissibility_integral(basis.lambdas(), noise.coupling, noise.q,
                                               rep.tf_grid[H - 1], cps, 1.0);
        // finiteness proxy: per-block increments must decrease
        auto decreasing = [](const Vec& s) {
            for (int i = 2; i < s.size(); ++i)
                if (s[i] - s[i - 1] > s[i - 1] - s[i - 2] + 1e-12 * std::abs(s[i]))
                    return false;
            return true;
        };
        rep.conditions["hs_domain_tail_decreasing"] = decreasing(hs.partial_sums);
        rep.conditions["admissibility_tail_decreasing"] = decreasing(ad.partial_sums);
    }

    const double t_max = rep.tf_grid[H - 1];
    const int steps = int(std::llround(t_max / opt.dt));
    const TimeGrid tg{opt.dt, steps};
    std::vector<int> mark(H);
    for (int i = 0; i < H; ++i) mark[i] = int(std::llround(rep.tf_grid[i] / opt.dt));

    const double trace_q = noise.q.sum();
    const Grid1D& grid = basis.grid();
    std::vector<GridFn> lift_cols;
    for (int j = 0; j < model.inputs(); ++j)
        lift_cols.push_back(lift.column_on_grid(grid, j));

    rep.member_ratios.resize(opt.members, H);
    for (int member = 0; member < opt.members; ++member) {
        // deterministic member-specific initial state and input
        const uint64_t tag = 0xE5E50000ull + uint64_t(member);
        const CVec x0 = random_modal_state(basis, opt.seed, tag, 1.0, 1.5);
        const double a0 =
            1.0 * (1.0 + 0.2 * rng::normal(opt.seed, tag, 1000, rng::kSetupStream, 0));
        const double om =
            1.0 + 0.5 * std::abs(rng::normal(opt.seed, tag, 1000, rng::kSetupStream, 1));
        const double ph = rng::normal(opt.seed, tag, 1000, rng::kSetupStream, 2);
        Vec amp = Vec::Constant(model.inputs(), a0);
        Vec omega = Vec::Constant(model.inputs(), om);
        Vec phase = Vec::Constant(model.inputs(), ph);
        const InputSignal input = InputSignal::sine(amp, omega, phase);

        // eps0 = reconstruction + B u(0): compatible by construction
        CGridFn eps0 = basis.reconstruct(x0);
        const Vec u0 = input.u(0.0);
        for (int j = 0; j < model.inputs(); ++j)
            eps0 += (u0[j] * lift_cols[j]).cast<cplx>();
        const GridFn eps0_real = eps0.real();
        const double eps0_norm_sq =
            inner_energy(eps0_real, eps0_real, grid, basis.H_nodes());

        MildSimulator sim(model, basis, noise, tg, opt.scheme, &lift, &input);
        const uint64_t member_seed = rng::detail::splitmix64(opt.seed ^ (tag << 1));

        // per-path: cumulative int ||y||^2 and ||eps(tf)||^2 at the marks
        Mat num_eps(opt.paths_per_member, H);
        Mat num_out(opt.paths_per_member, H);
        parallel_paths(opt.paths_per_member, opt.workers, [&](int64_t p) {
            double y_int = 0.0;
            double prev_y_sq = 0.0;
            int next_mark = 0;
            sim.run_with(member_seed, uint64_t(p), x0,
                         [&](int s, double t, const CVec& x) {
                const Vec u = input.u(t);
                Vec ta = basis.trace_a(x).real();
                Vec tb = basis.trace_b(x).real();
                for (int j = 0; j < model.inputs(); ++j) {
                    ta += u[j] * lift_cols[j].col(0);
                    tb += u[j] * lift_cols[j].col(grid.nodes() - 1);
                }
                const Vec y = model.WC * port_vector(ta, tb, model, true);
                const double y_sq = y.squaredNorm();
                if (s > 0) y_int += 0.5 * opt.dt * (prev_y_sq + y_sq);
                prev_y_sq = y_sq;
                while (next_mark < H && s == mark[next_mark]) {
                    CGridFn eps = basis.reconstruct(x);
                    for (int j = 0; j < model.inputs(); ++j)
                        eps += (u[j] * lift_cols[j]).cast<cplx>();
                    const GridFn er = eps.real();
                    num_eps(p, next_mark) = inner_energy(er, er, grid, basis.H_nodes());
                    num_out(p, next_mark) = y_int;
                    ++next_mark;
                }
            });
        });

        for (int i = 0; i < H; ++i) {
            std::vector<double> vals(opt.paths_per_member);
            for (int p = 0; p < opt.paths_per_member; ++p)
                vals[p] = num_eps(p, i) + num_out(p, i);
            const double numerator = pairwise_sum(vals) / opt.paths_per_member;
            // int_0^tf ||u||^2 dt by trapezoid on the step grid
            double u_int = 0.0;
            for (int s = 1; s <= mark[i]; ++s) {
                const double y0 = input.u((s - 1) * opt.dt).squaredNorm();
                const double y1 = input.u(s * opt.dt).squaredNorm();
                u_int += 0.5 * opt.dt * (y0 + y1);
            }
            const double denominator = eps0_norm_sq + u_int + trace_q;
            rep.member_ratios(member, i) = numerator / denominator;
        }
    }

    rep.max_ratios.resize(H);
    for (int i = 0; i < H; ++i) rep.max_ratios[i] = rep.member_ratios.col(i).maxCoeff();
    rep.growth_exponent = loglog_slope(rep.tf_grid, rep.max_ratios);
    rep.bounded_verdict = rep.growth_exponent < 0.1;
    rep.ensemble_description =
        "members=" + std::to_string(opt.members) + " modal initial states (decay 1.5, "
        "amp 1.0) with unit-scale sine inputs, compatible by construction; "
        "paths_per_member=" +
        std::to_string(opt.paths_per_member) + ", seed=" + std::to_string(opt.seed);
    rep.limitation =
        "empirical bound over a finite ensemble; the defining inequality quantifies "
        "over all admissible initial states and inputs, which no finite test family "
        "covers";
    return rep;
}

// ---------------------------------------------------------------------------

ContinuityReport ms_continuity_check(const MildSimulator& sim, const CVec& x0,
                                     double t0, const std::vector<double>& h_grid,
                                     int paths, uint64_t seed, int workers) {
    if (h_grid.size() < 3)
        throw ConfigError("ms_continuity: need at least 3 h points for the fit");
    const double dt = sim.time_grid().dt;
    const int s0 = int(std::llround(t0 / dt));
    std::vector<int> offsets;
    for (double h : h_grid) {
        const int off = int(std::llround(h / dt));
        if (off < 1 || s0 + off > sim.time_grid().steps)
            throw ConfigError("ms_continuity: h must be a positive step multiple inside "
                              "the horizon");
        offsets.push_back(off);
    }
    const int Hn = int(offsets.size());
    const ModalBasis& basis = sim.basis();

    Mat inc(paths, Hn);
    parallel_paths(paths, workers, [&](int64_t p) {
        CVec base;
        sim.run_with(seed, uint64_t(p), x0, [&](int s, double, const CVec& x) {
            if (s == s0) base = x;
            for (int i = 0; i < Hn; ++i)
                if (s == s0 + offsets[i])
                    inc(p, i) = basis.modal_norm_sq((x - base).eval());
        });
    });

    ContinuityReport rep;
    rep.h_grid.resize(Hn);
    rep.mean_sq_increment.resize(Hn);
    for (int i = 0; i < Hn; ++i) {
        rep.h_grid[i] = offsets[i] * dt;
        std::vector<double> vals(paths);
        for (int p = 0; p < paths; ++p) vals[p] = inc(p, i);
        rep.mean_sq_increment[i] = pairwise_sum(vals) / paths;
    }
    rep.slope = loglog_slope(rep.h_grid, rep.mean_sq_increment);
    rep.ok = rep.slope > 0.0;
    return rep;
}

// ---------------------------------------------------------------------------

EnergyBalanceReport energy_balance_check(const PhsModel& model, const ModalBasis& basis,
                                         const ResolvedNoise& noise, const TimeGrid& grid,
                                         double window_start, double window_end,
                                         const CVec& x0, int paths, uint64_t seed,
                                         int workers) {
    EnergyBalanceReport rep;
    rep.window_start = window_start;
    rep.window_end = window_end;
    rep.paths = paths;
    const int s1 = int(std::llround(window_start / grid.dt));
    const int s2 = int(std::llround(window_end / grid.dt));
    if (s1 < 0 || s2 <= s1 || s2 > grid.steps)
        throw ConfigError("energy balance: window must lie inside the horizon");

    const Grid1D& sgrid = basis.grid();
    MildSimulator sim(model, basis, noise, grid, Scheme::ExactGaussian);

    std::vector<double> drift(paths);
    parallel_paths(paths, workers, [&](int64_t p) {
        double e1 = 0.0, e2 = 0.0, power_int = 0.0, prev_power = 0.0;
        sim.run_with(seed, uint64_t(p), x0, [&](int s, double, const CVec& x) {
            if (s < s1) return;
            const Vec ta = basis.trace_a(x).real();
            const Vec tb = basis.trace_b(x).real();
            const BoundaryPorts ports = boundary_ports(ta, tb, model, true);
            const double power = ports.power();
            if (s > s1) power_int += 0.5 * grid.dt * (prev_power + power);
            prev_power = power;
            if (s == s1 || s == s2) {
                const CGridFn eps = basis.reconstruct(x);
                const GridFn er = eps.real();
                const double e = inner_energy(er, er, sgrid, basis.H_nodes());
                if (s == s1) e1 = e; else e2 = e;
            }
        });
        drift[size_t(p)] = (e2 - e1 - power_int) / (window_end - window_start);
    });

    const double mean = pairwise_sum(drift) / paths;
    std::vector<double> dev(paths);
    for (int p = 0; p < paths; ++p) dev[p] = (drift[p] - mean) * (drift[p] - mean);
    rep.mc_drift = mean;
    rep.mc_se = std::sqrt(pairwise_sum(dev) / (paths - 1) / paths);
    rep.expected_rate = energy_rate(model, noise, sgrid);
    rep.ok = std::abs(rep.mc_drift - rep.expected_rate) <= 3.0 * rep.mc_se;
    return rep;
}

// ---------------------------------------------------------------------------

RefinementReport convolution_equivalence_study(const ModalBasis& basis,
                                               const ResolvedNoise& noise, double t,
                                               const std::vector<int>& coarsenings,
                                               double dt_fine, int paths, uint64_t seed) {
    const int S_fine = int(std::llround(t / dt_fine));
    const Vec times = TimeGrid{dt_fine, S_fine}.times();
    const int D = int(coarsenings.size());
    Mat err(paths, D);
    for (int p = 0; p < paths; ++p) {
        const BrownianPath fine = sample_path(noise, times, seed, uint64_t(p));
        for (int d = 0; d < D; ++d) {
            const BrownianPath coarse = coarsen_path(fine, coarsenings[d]);
            const ModalTrajectory traj = simulate_increment_with_path(
                basis, noise, coarse, CVec::Zero(basis.size()));
            const CVec series = convolution_series(basis, noise, coarse, t);
            err(p, d) =
                (traj.states.col(traj.states.cols() - 1) - series).norm();
        }
    }
    RefinementReport rep;
    rep.dts.resize(D);
    rep.errors.resize(D);
    for (int d = 0; d < D; ++d) {
        rep.dts[d] = dt_fine * coarsenings[d];
        std::vector<double> vals(paths);
        for (int p = 0; p < paths; ++p) vals[p] = err(p, d);
        rep.errors[d] = pairwise_sum(vals) / paths;
    }
    rep.order = loglog_slope(rep.dts, rep.errors);
    return rep;
}

RefinementReport weak_residual_study(const ModalBasis& basis, const ResolvedNoise& noise,
                                     const CVec& z_psi_coeffs, double t,
                                     const std::vector<int>& coarsenings, double dt_fine,
                                     int paths, uint64_t seed) {
    const int S_fine = int(std::llround(t / dt_fine));
    const Vec times = TimeGrid{dt_fine, S_fine}.times();
    const int D = int(coarsenings.size());
    const CVec x0 = random_modal_state(basis, seed, 0xB0B0, 0.7, 1.2);
    Mat err(paths, D);
    for (int p = 0; p < paths; ++p) {
        const BrownianPath fine = sample_path(noise, times, seed, uint64_t(p));
        for (int d = 0; d < D; ++d) {
            const BrownianPath coarse = coarsen_path(fine, coarsenings[d]);
            const ModalTrajectory traj =
                simulate_increment_with_path(basis, noise, coarse, x0);
            const Vec res = weak_residual_with_path(traj, z_psi_coeffs, basis, noise,
                                                    nullptr, nullptr, coarse);
            err(p, d) = res[res.size() - 1];
        }
    }
    RefinementReport rep;
    rep.dts.resize(D);
    rep.errors.resize(D);
    for (int d = 0; d < D; ++d) {
        rep.dts[d] = dt_fine * coarsenings[d];
        std::vector<double> vals(paths);
        for (int p = 0; p < paths; ++p) vals[p] = err(p, d);
        rep.errors[d] = pairwise_sum(vals) / paths;
    }
    rep.order = loglog_slope(rep.dts, rep.errors);
    return rep;
}

RefinementReport extended_residual_study(const PhsModel& model, const ModalBasis& basis,
                                         const BoundaryLift& lift,
                                         const ResolvedNoise& noise,
                                         const InputSignal& input, double lambda_scale,
                                         double t, const std::vector<int>& coarsenings,
                                         double dt_fine, int paths, uint64_t seed,
                                         const Vec& u0, const CVec& x0) {
    const int S_fine = int(std::llround(t / dt_fine));
    const Vec times = TimeGrid{dt_fine, S_fine}.times();
    const int D = int(coarsenings.size());
    Mat err(paths, D);
    for (int p = 0; p < paths; ++p) {
        const BrownianPath fine = sample_path(noise, times, seed, uint64_t(p));
        for (int d = 0; d < D; ++d) {
            const BrownianPath coarse = coarsen_path(fine, coarsenings[d]);
            const YosidaForcing yf = yosida_forcing(model, basis, lift, input,
                                                    lambda_scale, coarse.times, u0);
            const ModalTrajectory traj =
                simulate_increment_with_path(basis, noise, coarse, x0, &yf.g);
            ExtendedTrajectory ext;
            ext.times = coarse.times;
            ext.u_states = yf.u_states;
            ext.x_states = traj.states;
            const Vec res = extended_residual_with_path(ext, model, basis, lift, noise,
                                                        input, lambda_scale, coarse);
            err(p, d) = res.maxCoeff();
        }
    }
    RefinementReport rep;
    rep.dts.resize(D);
    rep.errors.resize(D);
    for (int d = 0; d < D; ++d) {
        rep.dts[d] = dt_fine * coarsenings[d];
        std::vector<double> vals(paths);
        for (int p = 0; p < paths; ++p) vals[p] = err(p, d);
        rep.errors[d] = pairwise_sum(vals) / paths;
    }
    rep.order = loglog_slope(rep.dts, rep.errors);
    return rep;
}

YosidaLadderReport yosida_ladder(const PhsModel& model, const ModalBasis& basis,
                                 const BoundaryLift& lift, const ResolvedNoise& noise,
                                 const InputSignal& input, const std::vector<double>& lambdas,
                                 const TimeGrid& grid, Scheme scheme, const Vec& u0,
                                 const CVec& x0, int paths, uint64_t seed, int workers) {
    const int L = int(lambdas.size());
    const int T = grid.steps + 1;
    YosidaLadderReport rep;
    rep.lambdas.resize(L);

    // reference: mild extended solution (lambda = infinity)
    std::vector<ExtendedTrajectory> reference(paths);
    parallel_paths(paths, workers, [&](int64_t p) {
        reference[size_t(p)] =
            yosida_simulate(model, basis, lift, noise, input,
                            std::numeric_limits<double>::infinity(), grid, scheme, seed,
                            uint64_t(p), u0, x0);
    });

    rep.sup_errors.resize(L);
    for (int li = 0; li < L; ++li) {
        rep.lambdas[li] = lambdas[li];
        Mat gap_sums = Mat::Zero(paths, T);
        parallel_paths(paths, workers, [&](int64_t p) {
            const ExtendedTrajectory approx =
                yosida_simulate(model, basis, lift, noise, input, lambdas[li], grid,
                                scheme, seed, uint64_t(p), u0, x0);
            for (int s = 0; s < T; ++s) {
                const Vec du = approx.u_states.col(s) - reference[size_t(p)].u_states.col(s);
                const CVec dx = approx.x_states.col(s) - reference[size_t(p)].x_states.col(s);
                gap_sums(p, s) = extended_norm_sq(basis, du, dx);
            }
        });
        double sup = 0.0;
        for (int s = 0; s < T; ++s) {
            std::vector<double> vals(paths);
            for (int p = 0; p < paths; ++p) vals[p] = gap_sums(p, s);
            sup = std::max(sup, pairwise_sum(vals) / paths);
        }
        rep.sup_errors[li] = sup;
    }
    rep.monotone = true;
    for (int li = 1; li < L; ++li)
        if (!(rep.sup_errors[li] < rep.sup_errors[li - 1])) rep.monotone = false;
    return rep;
}

}  // namespace sphs
