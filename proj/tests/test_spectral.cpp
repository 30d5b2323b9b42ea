#include <doctest.h>

#include "sphs/spectral.hpp"
#include "sphs/string_example.hpp"
#include "test_helpers.hpp"

using namespace sphs;
using namespace sphs_test;

TEST_CASE("periodic diagnostic rows are the plain central first-derivative stencil") {
    PhsModel m;
    m.n = 1;
    m.a = 0.0;
    m.b = 1.0;
    m.P1 = Mat::Identity(1, 1);
    m.P0 = Mat::Zero(1, 1);
    m.hamiltonian = HamiltonianDensity::constant(Mat::Identity(1, 1));
    m.WB1 = Mat::Zero(1, 2);
    m.WB1(0, 0) = 1.0;
    m.WB2 = Mat(0, 2);
    m.WC = Mat::Zero(1, 2);

    const Grid1D grid(0.0, 1.0, 16);
    const Mat A = discretize_raw(m, grid, /*periodic=*/true);
    const double c = 1.0 / (2.0 * grid.spacing());
    for (int j = 0; j <= 16; ++j)
        for (int l = 0; l <= 16; ++l) {
            double expected = 0.0;
            if (l == (j + 1) % 17) expected += c;
            if (l == (j + 16) % 17) expected -= c;
            CHECK(A(j, l) == doctest::Approx(expected));
        }
}

TEST_CASE("discretize rejects tiny grids; eigensystem enforces K <= N/4") {
    const StringModel sm = build_string_model({1.0, 4.0, 0.0, 1.0});
    CHECK_THROWS_AS(discretize_operator(sm.model, 7), ConfigError);
    const DiscreteGenerator disc = discretize_operator(sm.model, 32);
    CHECK_THROWS_AS(eigensystem(sm.model, disc, 9), ConfigError);
}

TEST_CASE("raw generator applied to the affine lift reproduces A B exactly") {
    // constant coefficients: (H B)' is constant, and every stencil in play
    // differentiates affine data exactly
    const StringModel sm = build_string_model({1.0, 4.0, 0.0, 1.0});
    const Grid1D grid(0.0, 1.0, 64);
    const GridFn Bu = sm.lift.column_on_grid(grid, 0);
    const GridFn ABu = apply_raw_generator(sm.model, grid, Bu);
    // A B = P1 d/dz [0; T g] = [T g'; 0], g' = -1/(T (b-a))
    const double expected0 = 4.0 * sm.lift.beta(1, 0);
    for (int j = 0; j < grid.nodes(); ++j) {
        CHECK(ABu(0, j) == doctest::Approx(expected0).epsilon(1e-12));
        CHECK(ABu(1, j) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("string spectrum oracle: exact residuals, damping, and the 2k pi pattern") {
    const StringSpectrumResult res = string_spectrum_oracle(1.0, 4.0, 0.0, 1.0, 15);
    CHECK(!res.degenerate);
    CHECK(res.roots.size() == 15);
    const double gamma = 2.0;
    for (int k = 0; k < res.roots.size(); ++k) {
        CHECK(string_determinant_residual(1.0, 4.0, 0.0, 1.0, res.roots[k]) <= 1e-10);
        CHECK(res.roots[k].real() < 0.0);  // right-end damper dissipates
        CHECK(res.roots[k].real() == doctest::Approx(std::log(1.0 / 3.0)));
        // Im lambda * 2L/gamma lies on the even-multiples-of-pi comb
        const double pattern = res.roots[k].imag() * 2.0 / gamma / M_PI;
        CHECK(pattern == doctest::Approx(std::round(pattern)).epsilon(1e-9));
        CHECK(int(std::llround(pattern)) % 2 == 0);
    }
}

TEST_CASE("regime split: sqrt(T rho) < 1 moves the comb to odd multiples of pi") {
    const StringSpectrumResult res = string_spectrum_oracle(1.0, 0.25, 0.0, 1.0, 8);
    CHECK(!res.degenerate);
    const double gamma = 0.5;
    for (int k = 0; k < res.roots.size(); ++k) {
        const double pattern = res.roots[k].imag() * 2.0 / gamma / M_PI;
        CHECK(pattern == doctest::Approx(std::round(pattern)).epsilon(1e-9));
        CHECK(std::abs(int(std::llround(pattern))) % 2 == 1);
    }
    // spacing between consecutive positive-Im roots is gamma*pi/L on both sides
    const StringSpectrumResult above = string_spectrum_oracle(1.0, 4.0, 0.0, 1.0, 8);
    auto spacing = [](const StringSpectrumResult& r, double gam) {
        std::vector<double> ims;
        for (int k = 0; k < r.roots.size(); ++k)
            if (r.roots[k].imag() > 0) ims.push_back(r.roots[k].imag());
        std::sort(ims.begin(), ims.end());
        return (ims[1] - ims[0]) / (gam * M_PI);
    };
    CHECK(spacing(res, 0.5) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(spacing(above, 2.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("matched impedance: degenerate oracle, flagged model, refused eigenproblem") {
    const StringSpectrumResult res = string_spectrum_oracle(1.0, 1.0, 0.0, 1.0, 8);
    CHECK(res.degenerate);
    CHECK(res.roots.size() == 0);
    const StringModel sm = build_string_model({1.0, 1.0, 0.0, 1.0});
    CHECK(sm.impedance_matched);
    // the damper row constrains the outgoing characteristic at b, so the
    // incoming one is never closed: the discrete generator refuses
    CHECK_THROWS_AS(discretize_operator(sm.model, 64), NumericalError);
}

TEST_CASE("modal basis: biorthogonality, contraction spectrum, conjugate closure") {
    const StringFixture& f = default_string();
    CHECK(f.basis.nice());
    CHECK(f.basis.biorthogonality_defect() <= 1e-8);
    CHECK(f.basis.gap() > 0.0);
    for (int k = 0; k < f.basis.size(); ++k) {
        CHECK(f.basis.lambda(k).real() <= 1e-10);
        if (f.basis.lambda(k).imag() > 1e-9) {
            // the conjugate partner follows immediately and is exact
            REQUIRE(k + 1 < f.basis.size());
            CHECK(f.basis.lambda(k + 1) == std::conj(f.basis.lambda(k)));
            CHECK((f.basis.phi(k + 1) - f.basis.phi(k).conjugate()).norm() == 0.0);
        }
    }
    // independently re-measured Gram from raw quadrature
    for (int k = 0; k < f.basis.size(); ++k)
        for (int l = 0; l < f.basis.size(); ++l) {
            const cplx g = inner_energy(f.basis.phi(k), f.basis.psi(l), f.disc.grid,
                                        f.disc.H_nodes);
            CHECK(std::abs(g - (k == l ? 1.0 : 0.0)) <= 1e-8);
        }
}

TEST_CASE("finite-difference eigenvalues converge to the oracle at order >= 1.9") {
    const StringSpectrumResult oracle = string_spectrum_oracle(1.0, 4.0, 0.0, 1.0, 9);
    const StringModel sm = build_string_model({1.0, 4.0, 0.0, 1.0});
    const std::vector<int> Ns{128, 256, 512};
    std::vector<Vec> errs;
    for (int N : Ns) {
        const DiscreteGenerator disc = discretize_operator(sm.model, N);
        const ModalBasis basis = eigensystem(sm.model, disc, 9);
        Vec e(9);
        for (int k = 0; k < 9; ++k) e[k] = std::abs(basis.lambda(k) - oracle.roots[k]);
        errs.push_back(e);
    }
    for (int k = 1; k < 9; ++k) {
        const double order =
            std::log(errs[0][k] / errs[2][k]) / std::log(double(Ns[2]) / Ns[0]);
        CHECK(order >= 1.9);
    }
}

TEST_CASE("uniform gap is stable across resolutions") {
    const StringModel sm = build_string_model({1.0, 4.0, 0.0, 1.0});
    std::vector<double> gaps;
    for (int N : {128, 256, 512}) {
        const DiscreteGenerator disc = discretize_operator(sm.model, N);
        gaps.push_back(eigensystem(sm.model, disc, 8).gap());
    }
    for (double g : gaps) {
        CHECK(g > 0.0);
        CHECK(std::abs(g - gaps.back()) <= 0.05 * gaps.back());
    }
}

TEST_CASE("dense and shift-invert Arnoldi paths agree") {
    const StringModel sm = build_string_model({1.0, 4.0, 0.0, 1.0});
    const DiscreteGenerator disc = discretize_operator(sm.model, 304);  // dim 608
    const ModalBasis arn = eigensystem(sm.model, disc, 8, /*force_dense=*/false);
    const ModalBasis dense = eigensystem(sm.model, disc, 8, /*force_dense=*/true);
    REQUIRE(arn.size() == dense.size());
    for (int k = 0; k < arn.size(); ++k)
        CHECK(std::abs(arn.lambda(k) - dense.lambda(k)) <=
              1e-8 * (1.0 + std::abs(dense.lambda(k))));
}

TEST_CASE("semigroup: projection at t=0, eigenmode decay, law, contraction") {
    const StringFixture& f = default_string();
    const Grid1D& grid = f.disc.grid;

    CGridFn x = CGridFn::Zero(2, grid.nodes());
    for (int j = 0; j < grid.nodes(); ++j) {
        x(0, j) = std::sin(2.2 * grid.node(j)) + 0.4;
        x(1, j) = std::cos(1.3 * grid.node(j));
    }
    CHECK_THROWS_AS(semigroup_apply(f.basis, -0.1, x), ConfigError);

    // t = 0 reproduces the K-mode projection, idempotently
    const CGridFn proj = f.basis.reconstruct(f.basis.coeffs(x));
    const CGridFn proj2 = semigroup_apply(f.basis, 0.0, proj);
    CHECK((proj2 - proj).norm() <= 1e-10 * proj.norm());

    // eigenvector propagation
    const double t = 0.37;
    const CGridFn ephi = semigroup_apply(f.basis, t, f.basis.phi(1));
    CHECK((ephi - std::exp(f.basis.lambda(1) * t) * f.basis.phi(1)).norm() <=
          1e-8 * ephi.norm());

    // semigroup law on the span
    const CGridFn lhs = semigroup_apply(f.basis, 0.3, semigroup_apply(f.basis, 0.5, x));
    const CGridFn rhs = semigroup_apply(f.basis, 0.8, x);
    CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());

    // contraction relative to the projected state
    const double np = std::sqrt(norm_energy_sq(proj, grid, f.disc.H_nodes));
    for (double tt : {0.1, 1.0, 10.0}) {
        const CGridFn y = semigroup_apply(f.basis, tt, x);
        CHECK(std::sqrt(norm_energy_sq(y, grid, f.disc.H_nodes)) <= np * (1.0 + 1e-12));
    }
}

TEST_CASE("flux factorization: string gives Delta = diag(gamma, -gamma)") {
    const StringModel sm = build_string_model({1.0, 4.0, 0.0, 1.0});
    const Grid1D grid(0.0, 1.0, 32);
    const FluxFactorization fx = factorize_flux(sm.model, grid);
    for (int j = 0; j < grid.nodes(); ++j) {
        CHECK(fx.delta[j][0] == doctest::Approx(2.0));
        CHECK(fx.delta[j][1] == doctest::Approx(-2.0));
    }
    CHECK(fx.reconstruction_defect <= 1e-10);
}

TEST_CASE("flux factorization: identity density with symmetric P1 gives orthogonal S") {
    PhsModel m;
    m.n = 2;
    m.a = 0.0;
    m.b = 1.0;
    m.P1.resize(2, 2);
    m.P1 << 1.0, 0.4, 0.4, -0.7;
    m.P0 = Mat::Zero(2, 2);
    m.hamiltonian = HamiltonianDensity::constant(Mat::Identity(2, 2));
    m.WB1 = Mat::Zero(1, 4);
    m.WB1(0, 0) = 1.0;
    m.WB2 = Mat::Zero(1, 4);
    m.WB2(0, 1) = 1.0;
    m.WC = Mat::Zero(1, 4);
    const Grid1D grid(0.0, 1.0, 16);
    const FluxFactorization fx = factorize_flux(m, grid);
    Eigen::SelfAdjointEigenSolver<Mat> es(m.P1);
    for (int j = 0; j < grid.nodes(); ++j) {
        CHECK(fx.delta[j][0] == doctest::Approx(es.eigenvalues()[1]));
        CHECK(fx.delta[j][1] == doctest::Approx(es.eigenvalues()[0]));
        CHECK((fx.S[j] * fx.S[j].transpose() - Mat::Identity(2, 2)).norm() <= 1e-12);
        CHECK((fx.S[j] - fx.S.front()).norm() <= 1e-12);  // constant in z
    }
    CHECK(fx.reconstruction_defect <= 1e-10);
}

TEST_CASE("flux factorization: random diagonal densities reconstruct to 1e-10") {
    for (int trial = 0; trial < 5; ++trial) {
        PhsModel m = build_string_model({1.0, 4.0, 0.0, 1.0}).model;
        std::vector<double> zeta{0.0, 0.3, 0.7, 1.0};
        std::vector<Mat> vals;
        for (size_t s = 0; s < zeta.size(); ++s) {
            Mat H = Mat::Zero(2, 2);
            H(0, 0) = uniform(0.5, 2.0);
            H(1, 1) = uniform(2.5, 6.0);
            vals.push_back(H);
        }
        m.hamiltonian = HamiltonianDensity::on_grid(zeta, vals);
        const Grid1D grid(0.0, 1.0, 48);
        const FluxFactorization fx = factorize_flux(m, grid);
        CHECK(fx.reconstruction_defect <= 1e-10);
    }
}

TEST_CASE("flux factorization rejects coinciding speeds") {
    PhsModel m;
    m.n = 2;
    m.a = 0.0;
    m.b = 1.0;
    m.P1 = Mat::Identity(2, 2);  // both characteristic speeds equal
    m.P0 = Mat::Zero(2, 2);
    m.hamiltonian = HamiltonianDensity::constant(Mat::Identity(2, 2));
    m.WB1 = Mat::Zero(1, 4);
    m.WB1(0, 0) = 1.0;
    m.WB2 = Mat::Zero(1, 4);
    m.WB2(0, 1) = 1.0;
    m.WC = Mat::Zero(1, 4);
    const Grid1D grid(0.0, 1.0, 16);
    CHECK_THROWS_AS(factorize_flux(m, grid), NumericalError);
}
