#pragma once

#include <string>
#include <vector>

#include "sphs/grid.hpp"
#include "sphs/model.hpp"
#include "sphs/types.hpp"

namespace sphs {

// Finite-difference realization of the generator. The raw stencil applies
// eps -> P1 d/dz(H eps) + P0 H eps with second-order central differences and
// one-sided closures at the ends; the reduced matrix additionally eliminates
// the boundary rows against the full W_B condition (both the WB2 rows and
// Ker B), by restricting to an orthonormal basis of the admissible boundary
// trace pairs.
struct DiscreteGenerator {
    int n = 0;       // state components
    int N = 0;       // grid intervals
    Grid1D grid;     // N+1 nodes
    std::vector<Mat> H_nodes;
    Mat A;           // reduced generator, size n*N x n*N
    Mat Z;           // 2n x n orthonormal null basis of the boundary condition,
                     // [eps(a); eps(b)] = Z q
    // Energy-weighted Gram blocks of the reduced coordinates (block diagonal):
    std::vector<Mat> W_interior;  // per interior node, n x n
    Mat W_q;                      // boundary parameter block, n x n

    int dim() const { return n * N; }

    // Reduced coordinates -> stacked grid vector (node-major, size n*(N+1)).
    CVec prolong(const CVec& y) const;
    CGridFn to_gridfn(const CVec& y) const;
    // Solve W ypsi = g blockwise (W is the reduced Gram).
    CVec solve_weight(const CVec& g) const;
};

// Raw stencil matrix on all n*(N+1) grid unknowns. periodic = true replaces
// the one-sided end closures with wrap-around central differences (diagnostic
// mode for stencil checks).
Mat discretize_raw(const PhsModel& model, const Grid1D& grid, bool periodic = false);

// Applies the raw stencil to a grid function without assembling the matrix.
GridFn apply_raw_generator(const PhsModel& model, const Grid1D& grid, const GridFn& x);
CGridFn apply_raw_generator(const PhsModel& model, const Grid1D& grid, const CGridFn& x);

// Assembles the reduced generator. Rejects N < 8.
DiscreteGenerator discretize_operator(const PhsModel& model, int N);

// Truncated Riesz-spectral data of the generator: K eigenvalues sorted by
// |Im lambda| (positive imaginary part first on ties), grid eigenfunctions
// phi_k, adjoint eigenfunctions psi_k of the X-weighted adjoint, biorthogonal
// normalization <phi_k, psi_l>_X = delta_kl, and the uniform spectral gap.
//
// Conjugate closure is enforced: eigenvalues off the real axis are kept in
// (lambda, conj lambda) pairs with phi/psi conjugated exactly, so real fields
// reconstruct to real fields. The truncation is rounded down when the
// requested K would split a pair; size() reports the effective count.
class ModalBasis {
  public:
    int size() const { return int(lambdas_.size()); }
    const CVec& lambdas() const { return lambdas_; }
    cplx lambda(int k) const { return lambdas_[k]; }
    const CGridFn& phi(int k) const { return phis_[k]; }
    const CGridFn& psi(int k) const { return psis_[k]; }
    double gap() const { return gap_; }
    bool nice() const { return nice_; }
    const std::string& nice_message() const { return nice_message_; }
    double biorthogonality_defect() const { return biorth_defect_; }

    const Grid1D& grid() const { return grid_; }
    const std::vector<Mat>& H_nodes() const { return H_nodes_; }

    // Modal coefficient x_k = <x, psi_k>_X.
    cplx coeff(const CGridFn& x, int k) const;
    CVec coeffs(const CGridFn& x) const;
    CVec coeffs(const GridFn& x) const;
    CGridFn reconstruct(const CVec& modal) const;

    // Gram matrix G(k,l) = <phi_l, phi_k>_X, so ||sum x_k phi_k||^2 = x^H G x.
    const CMat& gram() const { return gram_; }
    double modal_norm_sq(const CVec& modal) const;

    // Boundary traces of sum x_k phi_k at the interval ends (n-vectors).
    CVec trace_a(const CVec& modal) const;
    CVec trace_b(const CVec& modal) const;

    friend ModalBasis eigensystem(const PhsModel&, const DiscreteGenerator&, int,
                                  bool);

  private:
    CVec lambdas_;
    std::vector<CGridFn> phis_, psis_;
    double gap_ = 0.0;
    bool nice_ = false;
    std::string nice_message_;
    double biorth_defect_ = 0.0;
    Grid1D grid_{0.0, 1.0, 2};
    std::vector<Mat> H_nodes_;
    CMat gram_;
    CMat phi_end_a_, phi_end_b_;  // n x K trace matrices
};

// Computes the K modes of smallest |Im lambda|. Dense QR iteration for small
// reduced problems, shift-invert Arnoldi above that (force_dense pins the
// dense path for cross-checks). Requires K <= N/4 so that only
// well-discretized modes are kept. Clustered eigenvalues (gap < 1e-8) or
// ill-conditioned phi/psi pairings mark the basis "not nice" instead of being
// silently normalized.
ModalBasis eigensystem(const PhsModel& model, const DiscreteGenerator& disc, int K,
                       bool force_dense = false);

// Semigroup action T(t) x = sum_k e^{lambda_k t} <x, psi_k> phi_k on the
// span of the retained modes.
CGridFn semigroup_apply(const ModalBasis& basis, double t, const CGridFn& x);

struct StringSpectrumResult {
    CVec roots;                      // sorted like eigensystem output
    bool degenerate = false;         // matched impedance sqrt(T rho) = 1
    std::vector<std::string> warnings;
};

// Characteristic-equation roots for the constant-coefficient vibrating string
// with the free-end input row at a and the damper row at b. Seeds a damped
// Newton iteration on the 2x2 traveling-wave boundary determinant from the
// asymptotic lattice Re = gamma*log|r|/(2L), Im on a pi*gamma/L spaced comb,
// where r = (sqrt(T rho) - 1)/(sqrt(T rho) + 1).
StringSpectrumResult string_spectrum_oracle(double rho, double T_modulus, double a,
                                            double b, int K);

// Residual |det M(lambda)| / ||M(lambda)|| of the traveling-wave boundary
// determinant (diagnostic for oracle outputs).
double string_determinant_residual(double rho, double T_modulus, double a, double b,
                                   cplx lambda);

// Pointwise eigenfactorization P1 H(z) = S^{-1}(z) Delta(z) S(z) with real
// distinct eigenvalues (hyperbolic flux). Continuity in z is kept by sorting
// eigenvalues in descending order and aligning eigenvector signs to the
// previous node. Eigenvalue collisions along z raise NumericalError.
struct FluxFactorization {
    std::vector<Vec> delta;  // per node, descending diagonal of Delta
    std::vector<Mat> S;      // per node
    std::vector<Mat> S_inv;
    double reconstruction_defect = 0.0;  // max over nodes of ||S^-1 D S - P1 H||
};

FluxFactorization factorize_flux(const PhsModel& model, const Grid1D& grid);

}  // namespace sphs
