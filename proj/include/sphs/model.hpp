#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sphs/grid.hpp"
#include "sphs/types.hpp"

namespace sphs {

// Hamiltonian density H(zeta): either a constant matrix or matrix samples on
// an increasing abscissa list, interpolated piecewise-linearly in between.
class HamiltonianDensity {
  public:
    static HamiltonianDensity constant(Mat H);
    static HamiltonianDensity on_grid(std::vector<double> zeta, std::vector<Mat> values);

    Mat at(double zeta) const;
    bool is_constant() const { return grid_zeta_.empty(); }
    int dim() const { return constant_.rows() > 0 ? int(constant_.rows()) : int(grid_values_[0].rows()); }

    const Mat& constant_value() const { return constant_; }
    const std::vector<double>& sample_zeta() const { return grid_zeta_; }
    const std::vector<Mat>& sample_values() const { return grid_values_; }

  private:
    Mat constant_;
    std::vector<double> grid_zeta_;
    std::vector<Mat> grid_values_;
};

// The port-Hamiltonian tuple (P0, P1, H(.), W_B split into WB1/WB2, W_C)
// on the spatial interval [a,b]. State dimension n, inputs m = rows(WB1),
// outputs p = rows(WC).
struct PhsModel {
    int n = 0;
    double a = 0.0, b = 1.0;
    Mat P0, P1;
    HamiltonianDensity hamiltonian = HamiltonianDensity::constant(Mat::Identity(1, 1));
    Mat WB1, WB2, WC;

    int inputs() const { return int(WB1.rows()); }
    int outputs() const { return int(WC.rows()); }
    Mat WB() const;  // stacked [WB1; WB2], n x 2n

    Mat H_at(double zeta) const { return hamiltonian.at(zeta); }
    std::vector<Mat> H_nodes(const Grid1D& grid) const;
};

struct ValidationCheck {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    double h_lower = 0.0;  // m in  m I <= H(z) <= M I
    double h_upper = 0.0;  // M
    bool all_pass() const;
};

struct BoundaryPorts {
    Vec flow;    // f_boundary
    Vec effort;  // e_boundary
    double power() const { return flow.dot(effort); }
};

// Interior lift of boundary inputs: profile(z) is an n x m matrix so that
// B u = profile(z) * u. Affine in z, with the generator action A(Bu)
// available analytically through the coefficient pair.
struct BoundaryLift {
    Mat alpha;  // n x m, constant coefficient
    Mat beta;   // n x m, slope coefficient
    Mat profile_at(double zeta) const { return alpha + zeta * beta; }
    GridFn column_on_grid(const Grid1D& grid, int channel) const;
};

struct GenerationReport {
    Mat product;  // W_B Sigma W_B^T
    Vec eigenvalues;
    bool psd = false;
};

// Structural checks of Def-level invariants: P1 self-adjoint/invertible, P0
// skew-adjoint, m I <= H <= M I on sampled points, rank conditions on W_B and
// [WB1; WC]. Dimension mismatches throw ConfigError; everything else lands in
// the report as a pass/fail entry with the measured quantity.
ValidationReport validate_model(const PhsModel& model, int h_samples = 257);

// Boundary effort/flow from the traces of (H eps) at the two endpoints:
//   e = (H eps)(b) + (H eps)(a)) / sqrt(2)
//   f = (P1 (H eps)(b) - P1 (H eps)(a)) / sqrt(2)
// Pass apply_H = true to hand in raw eps traces instead of (H eps) traces.
BoundaryPorts boundary_ports(const Vec& trace_a, const Vec& trace_b,
                             const PhsModel& model, bool apply_H = false);

// Port vector [f; e] as one 2n column (used against WB1/WB2/WC rows).
Vec port_vector(const Vec& trace_a, const Vec& trace_b, const PhsModel& model,
                bool apply_H = false);

// Total energy (1/2) integral eps^T H eps over the grid.
double energy(const GridFn& state, const PhsModel& model, const Grid1D& grid);

// Input functional B[eps] = WB1 * ports and output C[eps] = WC * ports from a
// grid state.
Vec input_functional(const GridFn& state, const PhsModel& model);
Vec output_functional(const GridFn& state, const PhsModel& model);

// Searches the affine family alpha + beta*z for a lift with
//   WB1 * ports(B e_j) = e_j   and   WB2 * ports(B e_j) = 0.
// Throws NumericalError when no affine profile satisfies the port identities.
BoundaryLift build_boundary_lift(const PhsModel& model, double tol = 1e-10);

// Contraction-generation test: W_B Sigma W_B^T with Sigma = [[0,I],[I,0]] must
// be positive semidefinite. The PSD verdict allows a floating-point slack of
// -1e-10 * ||product|| on the smallest eigenvalue (the string case has an
// exact zero eigenvalue).
GenerationReport generation_check(const PhsModel& model);

}  // namespace sphs
