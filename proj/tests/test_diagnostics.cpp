#include <doctest.h>

#include "sphs/diagnostics.hpp"
#include "test_helpers.hpp"

using namespace sphs;
using namespace sphs_test;

namespace {
ResolvedNoise string_noise(const StringFixture& f, int I = 16) {
    QWienerSpec spec = QWienerSpec::channel(QWienerSpec::power_law(I, 0.1, 4.0),
                                            QWienerSpec::Family::Sine, 0);
    return resolve_noise(spec, f.sm.model, f.basis);
}
}  // namespace

TEST_CASE("ito isometry: string defaults pass both the flat and convolution checks") {
    const StringFixture& f = default_string();
    const ResolvedNoise noise = string_noise(f);
    const ItoIsometryReport rep =
        ito_isometry_check(f.sm.model, f.basis, noise, 1.0, 100, 4000, 11);
    CHECK(rep.flat_ok);
    CHECK(rep.conv_ok);
    CHECK(rep.flat_expected == doctest::Approx(hs_norm_sq(noise, f.sm.model, f.basis.grid())));
    CHECK_THROWS_AS(ito_isometry_check(f.sm.model, f.basis, noise, 1.0, 10, 100, 1),
                    ConfigError);  // needs >= 10^3 paths
}

TEST_CASE("ito isometry: known trace gives E||int H dw||^2 = t Tr within 3 SE") {
    // grid profile with ||f||_X^2 = 1.5 and q = 2, so Tr[HQH*] = 3; t = 2 -> 6
    const StringFixture& f = default_string();
    const Grid1D& grid = f.basis.grid();
    GridFn prof = GridFn::Zero(2, grid.nodes());
    for (int j = 0; j < grid.nodes(); ++j)
        prof(0, j) = std::sqrt(3.0) * std::sqrt(2.0) * std::sin(M_PI * grid.node(j));
    QWienerSpec spec = QWienerSpec::grid_profiles(Vec::Constant(1, 2.0), {prof});
    const ResolvedNoise noise = resolve_noise(spec, f.sm.model, f.basis);
    CHECK(hs_norm_sq(noise, f.sm.model, grid) == doctest::Approx(3.0).epsilon(1e-8));
    const ItoIsometryReport rep =
        ito_isometry_check(f.sm.model, f.basis, noise, 2.0, 64, 4000, 5);
    CHECK(rep.flat_expected == doctest::Approx(6.0).epsilon(1e-8));
    CHECK(std::abs(rep.flat_mc - 6.0) <= 3.0 * rep.flat_se);
}

TEST_CASE("admissibility: zero noise sums to zero and is convergent") {
    const StringFixture& f = default_string();
    const CVec lam = f.basis.lambdas();
    const CMat h = CMat::Zero(f.basis.size(), 2);
    const Vec q = Vec::Zero(2);
    const AdmissibilityReport rep =
        admissibility_integral(lam, h, q, 1.0, {4, 8, 12, 16});
    CHECK(rep.partial_sums.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.convergent);
}

TEST_CASE("admissibility is monotone in t and in the truncation") {
    const StringFixture& f = default_string();
    const ResolvedNoise noise = string_noise(f);
    // note: the conjugate-closed basis holds 15 modes for a K=16 request
    const std::vector<int> cps{4, 8, 12, f.basis.size()};
    const AdmissibilityReport r1 =
        admissibility_integral(f.basis.lambdas(), noise.coupling, noise.q, 0.5, cps, 1.0);
    const AdmissibilityReport r2 =
        admissibility_integral(f.basis.lambdas(), noise.coupling, noise.q, 1.5, cps, 1.0);
    REQUIRE(r1.partial_sums.size() == 4);
    for (int c = 0; c < 4; ++c) CHECK(r2.partial_sums[c] >= r1.partial_sums[c]);
    for (int c = 1; c < 4; ++c) CHECK(r1.partial_sums[c] >= r1.partial_sums[c - 1]);
}

TEST_CASE("admissibility regime split: band-limited noise is Cauchy, flat noise grows K^3") {
    const StringFixture& f = default_string();

    QWienerSpec pass_spec = QWienerSpec::modal_pairs(QWienerSpec::power_law(8, 0.1, 2.0));
    const ResolvedNoise pass_noise = resolve_noise(pass_spec, f.sm.model, f.basis);
    CVec lam;
    CMat h;
    extend_string_spectrum(f.basis, pass_noise, pass_spec, f.sm.params, 320, &lam, &h);
    const AdmissibilityReport pass =
        admissibility_integral(lam, h, pass_noise.q, 1.0, {64, 128, 192, 256, 320});
    CHECK(pass.convergent);
    CHECK(pass.tail_ratio <= 1e-6);

    QWienerSpec fail_spec = QWienerSpec::modal_flat(Vec::Constant(8, 0.1), 0.05);
    const ResolvedNoise fail_noise = resolve_noise(fail_spec, f.sm.model, f.basis);
    CVec lam2;
    CMat h2;
    extend_string_spectrum(f.basis, fail_noise, fail_spec, f.sm.params, 320, &lam2, &h2);
    const AdmissibilityReport fail =
        admissibility_integral(lam2, h2, fail_noise.q, 1.0, {64, 128, 192, 256, 320});
    CHECK(!fail.convergent);
    CHECK(fail.growth_exponent == doctest::Approx(3.0).epsilon(0.2));

    // extension is undefined for spatial-channel rules
    const ResolvedNoise channel_noise = string_noise(f);
    QWienerSpec channel_spec = QWienerSpec::channel(QWienerSpec::power_law(16, 0.1, 4.0),
                                                    QWienerSpec::Family::Sine, 0);
    CVec lam3;
    CMat h3;
    CHECK_THROWS_AS(extend_string_spectrum(f.basis, channel_noise, channel_spec,
                                           f.sm.params, 320, &lam3, &h3),
                    ConfigError);
}

TEST_CASE("hs domain check: zero noise and finite-rank intensities pass") {
    const StringFixture& f = default_string();
    const std::vector<int> cps{4, 8, 12, 16};
    {
        const CMat h = CMat::Zero(f.basis.size(), 1);
        const HsDomainReport rep =
            hs_domain_check(f.basis.lambdas(), h, Vec::Zero(1), cps);
        CHECK(rep.finite);
        CHECK(rep.partial_sums.cwiseAbs().maxCoeff() == 0.0);
    }
    {
        // intensity mapping into the span of the first 3 modes only
        CMat h = CMat::Zero(f.basis.size(), 2);
        h(0, 0) = 0.7;
        h(1, 1) = cplx(0.2, 0.4);
        h(2, 1) = std::conj(h(1, 1));
        const HsDomainReport rep =
            hs_domain_check(f.basis.lambdas(), h, Vec::Constant(2, 0.5), cps);
        CHECK(rep.finite);
        CHECK(rep.tail_ratio == 0.0);
    }
}

TEST_CASE("well-posedness ratio: finite bounds, flat growth, reported conditions") {
    const StringFixture& f = default_string();
    const ResolvedNoise noise = string_noise(f);
    QWienerSpec spec = QWienerSpec::channel(QWienerSpec::power_law(16, 0.1, 4.0),
                                            QWienerSpec::Family::Sine, 0);
    WellposednessOptions opt;
    opt.tf_grid = {0.5, 1.0, 2.0};
    opt.members = 6;
    opt.paths_per_member = 32;
    opt.dt = 2e-3;
    opt.seed = 404;
    const WellposednessReport rep =
        wellposedness_ratio(f.sm.model, f.basis, f.sm.lift, noise, spec, opt);
    for (int i = 0; i < rep.max_ratios.size(); ++i) {
        CHECK(std::isfinite(rep.max_ratios[i]));
        CHECK(rep.max_ratios[i] > 0.0);
    }
    CHECK(rep.growth_exponent < 0.1);
    CHECK(rep.bounded_verdict);
    CHECK(rep.conditions.at("generation_psd"));
    CHECK(rep.conditions.at("flux_factorization"));
    CHECK(rep.conditions.at("hs_domain_tail_decreasing"));
    CHECK(!rep.limitation.empty());
    CHECK(!rep.ensemble_description.empty());

    // determinism of the whole report
    const WellposednessReport rep2 =
        wellposedness_ratio(f.sm.model, f.basis, f.sm.lift, noise, spec, opt);
    CHECK((rep.member_ratios - rep2.member_ratios).norm() == 0.0);
}

TEST_CASE("well-posedness ratio: homogeneity and the deterministic reduction") {
    const StringFixture& f = default_string();
    ResolvedNoise quiet;
    quiet.q = Vec::Zero(1);
    quiet.coupling = CMat::Zero(f.basis.size(), 1);
    quiet.has_coupling = true;
    const TimeGrid tg{1e-3, 500};
    const InputSignal u1 = InputSignal::sine(Vec::Constant(1, 0.4),
                                             Vec::Constant(1, 2.0), Vec::Zero(1));
    const InputSignal u2 = InputSignal::sine(Vec::Constant(1, 0.8),
                                             Vec::Constant(1, 2.0), Vec::Zero(1));
    CVec x0 = CVec::Zero(f.basis.size());
    x0[0] = 0.3;

    auto ratio_for = [&](const InputSignal& input, const CVec& init) {
        MildSimulator sim(f.sm.model, f.basis, quiet, tg, Scheme::Increment, &f.sm.lift,
                          &input);
        double y_int = 0.0, prev = 0.0, eps_tf = 0.0;
        const Grid1D& grid = f.basis.grid();
        const GridFn lift_col = f.sm.lift.column_on_grid(grid, 0);
        sim.run_with(1, 0, init, [&](int s, double t, const CVec& x) {
            const Vec u = input.u(t);
            Vec ta = f.basis.trace_a(x).real() + u[0] * lift_col.col(0);
            Vec tb = f.basis.trace_b(x).real() + u[0] * lift_col.col(grid.nodes() - 1);
            const double ysq = (f.sm.model.WC * port_vector(ta, tb, f.sm.model, true))
                                   .squaredNorm();
            if (s > 0) y_int += 0.5 * tg.dt * (prev + ysq);
            prev = ysq;
            if (s == tg.steps) {
                CGridFn eps = f.basis.reconstruct(x);
                eps += (u[0] * lift_col).cast<cplx>();
                const GridFn er = eps.real();
                eps_tf = inner_energy(er, er, grid, f.basis.H_nodes());
            }
        });
        CGridFn eps0 = f.basis.reconstruct(init);
        eps0 += (input.u(0.0)[0] * lift_col).cast<cplx>();
        const GridFn e0 = eps0.real();
        double u_int = 0.0;
        for (int s = 1; s <= tg.steps; ++s)
            u_int += 0.5 * tg.dt *
                     (input.u((s - 1) * tg.dt).squaredNorm() +
                      input.u(s * tg.dt).squaredNorm());
        const double denom = inner_energy(e0, e0, grid, f.basis.H_nodes()) + u_int;
        return (eps_tf + y_int) / denom;
    };

    const double r1 = ratio_for(u1, x0);
    const double r2 = ratio_for(u2, (2.0 * x0).eval());
    CHECK(r1 == doctest::Approx(r2).epsilon(1e-12));  // degree-2 homogeneity

    // with u = 0 and no output contribution the contraction gives ratio <= 1
    MildSimulator free_sim(f.sm.model, f.basis, quiet, tg, Scheme::Increment);
    double eps_tf = 0.0;
    free_sim.run_with(1, 0, x0, [&](int s, double, const CVec& x) {
        if (s == tg.steps) eps_tf = f.basis.modal_norm_sq(x);
    });
    CHECK(eps_tf / f.basis.modal_norm_sq(x0) <= 1.0 + 1e-12);
}

TEST_CASE("mean-square continuity: smooth paths fit slope 2, noisy paths stay in (0,2]") {
    const StringFixture& f = default_string();
    const TimeGrid tg{1e-3, 600};
    const std::vector<double> h_grid{1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2};

    ResolvedNoise quiet;
    quiet.q = Vec::Zero(1);
    quiet.coupling = CMat::Zero(f.basis.size(), 1);
    quiet.has_coupling = true;
    MildSimulator smooth(f.sm.model, f.basis, quiet, tg, Scheme::Increment);
    CVec x0 = CVec::Zero(f.basis.size());
    x0[0] = 0.5;
    x0[1] = cplx(0.2, 0.2);
    x0[2] = std::conj(x0[1]);
    const ContinuityReport r0 = ms_continuity_check(smooth, x0, 0.5, h_grid, 2, 5);
    CHECK(r0.slope == doctest::Approx(2.0).epsilon(0.05));
    CHECK(r0.ok);

    const ResolvedNoise noise = string_noise(f);
    MildSimulator noisy(f.sm.model, f.basis, noise, tg, Scheme::ExactGaussian);
    const ContinuityReport r1 = ms_continuity_check(noisy, x0, 0.5, h_grid, 400, 5);
    CHECK(r1.ok);
    CHECK(r1.slope > 0.0);
    CHECK(r1.slope <= 2.0);

    CHECK_THROWS_AS(ms_continuity_check(noisy, x0, 0.5, {1e-3, 2e-3}, 10, 5), ConfigError);
}

TEST_CASE("energy balance: expected drift equals the noise rate within 3 SE") {
    const StringFixture& f = default_string();
    const ResolvedNoise noise = string_noise(f);
    const TimeGrid tg{1e-3, 1000};
    CVec x0 = CVec::Zero(f.basis.size());
    x0[0] = 0.3;
    const EnergyBalanceReport rep =
        energy_balance_check(f.sm.model, f.basis, noise, tg, 0.25, 1.0, x0, 1500, 5);
    CHECK(rep.ok);
    CHECK(rep.expected_rate > 0.0);
}

TEST_CASE("convolution series and per-step scheme self-converge at order >= 0.9") {
    const StringFixture& f = default_string();
    const ResolvedNoise noise = string_noise(f);
    const RefinementReport rep =
        convolution_equivalence_study(f.basis, noise, 1.0, {4, 2, 1}, 1e-3, 8, 99);
    CHECK(rep.order >= 0.9);
    CHECK(rep.errors[2] < rep.errors[0]);
}

TEST_CASE("weak residual refines at order >= 0.9 for psi_1 and psi_5") {
    const StringFixture& f = default_string();
    const ResolvedNoise noise = string_noise(f);
    for (int zidx : {1, 5}) {
        CVec z = CVec::Zero(f.basis.size());
        z[zidx] = 1.0;
        const RefinementReport rep =
            weak_residual_study(f.basis, noise, z, 1.0, {4, 2, 1}, 1e-3, 8, 123);
        CHECK(rep.order >= 0.9);
    }
}

TEST_CASE("extended integral identity refines at order >= 0.9") {
    const StringFixture& f = default_string();
    const ResolvedNoise noise = string_noise(f);
    const InputSignal input = InputSignal::sine(Vec::Constant(1, 0.5),
                                                Vec::Constant(1, 2.0), Vec::Zero(1));
    CVec x0 = CVec::Zero(f.basis.size());
    x0[0] = 0.3;
    const RefinementReport rep =
        extended_residual_study(f.sm.model, f.basis, f.sm.lift, noise, input, 100.0,
                                1.0, {4, 2, 1}, 1e-3, 8, 5, input.u(0.0), x0);
    CHECK(rep.order >= 0.9);
}

TEST_CASE("yosida ladder decreases monotonically over the lambda decades") {
    const StringFixture& f = default_string();
    const ResolvedNoise noise = string_noise(f);
    const InputSignal input = InputSignal::sine(Vec::Constant(1, 0.5),
                                                Vec::Constant(1, 2.0), Vec::Zero(1));
    const TimeGrid tg{1e-3, 1000};
    CVec x0 = CVec::Zero(f.basis.size());
    x0[0] = 0.3;
    const YosidaLadderReport rep =
        yosida_ladder(f.sm.model, f.basis, f.sm.lift, noise, input,
                      {10.0, 100.0, 1000.0, 10000.0}, tg, Scheme::Increment,
                      input.u(0.0), x0, 32, 5);
    CHECK(rep.monotone);
    CHECK(rep.sup_errors[3] < rep.sup_errors[0] * 1e-3);
}

TEST_CASE("log-log slope helper recovers exact power laws") {
    Vec x(4), y(4);
    for (int i = 0; i < 4; ++i) {
        x[i] = std::pow(2.0, i);
        y[i] = 3.0 * std::pow(x[i], 1.7);
    }
    CHECK(loglog_slope(x, y) == doctest::Approx(1.7).epsilon(1e-12));
}
