#include "sphs/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace sphs {

namespace {
constexpr double kSqrt2Inv = 0.70710678118654752440;

double matnorm(const Mat& m) { return m.norm(); }

int numeric_rank(const Mat& m, double rel_tol = 1e-10) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0;
    int r = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > rel_tol * s[0]) ++r;
    return r;
}
}  // namespace

HamiltonianDensity HamiltonianDensity::constant(Mat H) {
    HamiltonianDensity d;
    d.constant_ = std::move(H);
    return d;
}

HamiltonianDensity HamiltonianDensity::on_grid(std::vector<double> zeta,
                                               std::vector<Mat> values) {
    if (zeta.size() != values.size() || zeta.size() < 2)
        throw ConfigError("hamiltonian grid: need matching abscissae and at least 2 samples");
    for (size_t i = 1; i < zeta.size(); ++i)
        if (!(zeta[i] > zeta[i - 1]))
            throw ConfigError("hamiltonian grid: abscissae must be strictly increasing");
    HamiltonianDensity d;
    d.grid_zeta_ = std::move(zeta);
    d.grid_values_ = std::move(values);
    return d;
}

Mat HamiltonianDensity::at(double zeta) const {
    if (is_constant()) return constant_;
    if (zeta <= grid_zeta_.front()) return grid_values_.front();
    if (zeta >= grid_zeta_.back()) return grid_values_.back();
    const auto it = std::upper_bound(grid_zeta_.begin(), grid_zeta_.end(), zeta);
    const size_t hi = size_t(it - grid_zeta_.begin());
    const size_t lo = hi - 1;
    const double t = (zeta - grid_zeta_[lo]) / (grid_zeta_[hi] - grid_zeta_[lo]);
    return (1.0 - t) * grid_values_[lo] + t * grid_values_[hi];
}

Mat PhsModel::WB() const {
    Mat wb(WB1.rows() + WB2.rows(), WB1.cols());
    wb << WB1, WB2;
    return wb;
}

std::vector<Mat> PhsModel::H_nodes(const Grid1D& grid) const {
    std::vector<Mat> out;
    out.reserve(grid.nodes());
    for (int j = 0; j < grid.nodes(); ++j) out.push_back(H_at(grid.node(j)));
    return out;
}

ValidationReport validate_model(const PhsModel& model, int h_samples) {
    const int n = model.n;
    if (n <= 0) throw ConfigError("model: state dimension must be positive");
    if (model.P1.rows() != n || model.P1.cols() != n || model.P0.rows() != n ||
        model.P0.cols() != n)
        throw ConfigError("model: P0/P1 must be n x n");
    if (model.hamiltonian.dim() != n)
        throw ConfigError("model: Hamiltonian density must be n x n");
    if (model.WB1.cols() != 2 * n || model.WB2.cols() != 2 * n || model.WC.cols() != 2 * n)
        throw ConfigError("model: WB1/WB2/WC must have 2n columns");
    if (model.WB1.rows() + model.WB2.rows() != n)
        throw ConfigError("model: rows(WB1) + rows(WB2) must equal n");
    if (!(model.b > model.a)) throw ConfigError("model: interval must satisfy a < b");

    ValidationReport report;
    auto add = [&](const std::string& name, bool pass, double measured,
                   const std::string& detail = "") {
        report.checks.push_back({name, pass, measured, detail});
    };

    {
        const double defect = matnorm(model.P1 - model.P1.transpose());
        const double scale = std::max(matnorm(model.P1), 1e-300);
        add("P1 self-adjoint", defect <= 1e-12 * scale, defect / scale);
    }
    {
        Eigen::JacobiSVD<Mat> svd(model.P1);
        const double smin = svd.singularValues().minCoeff();
        const double smax = svd.singularValues().maxCoeff();
        const bool invertible = smax > 0.0 && smin > 1e-12 * smax;
        add("P1 invertible", invertible, smax > 0.0 ? smin / smax : 0.0);
    }
    {
        const double defect = matnorm(model.P0 + model.P0.transpose());
        const double scale = matnorm(model.P0);
        const bool pass = (scale == 0.0) ? (defect == 0.0) : (defect <= 1e-12 * scale);
        add("P0 skew-adjoint", pass, scale == 0.0 ? defect : defect / scale);
    }
    {
        double m = std::numeric_limits<double>::infinity();
        double M = -std::numeric_limits<double>::infinity();
        double sym_defect = 0.0;
        for (int s = 0; s < h_samples; ++s) {
            const double zeta =
                model.a + (model.b - model.a) * double(s) / double(h_samples - 1);
            const Mat H = model.H_at(zeta);
            sym_defect = std::max(sym_defect, matnorm(H - H.transpose()) /
                                                  std::max(matnorm(H), 1e-300));
            Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.transpose()));
            m = std::min(m, es.eigenvalues().minCoeff());
            M = std::max(M, es.eigenvalues().maxCoeff());
        }
        report.h_lower = m;
        report.h_upper = M;
        add("H self-adjoint", sym_defect <= 1e-12, sym_defect);
        add("H uniformly positive (m > 0)", m > 0.0, m, "M=" + std::to_string(M));
    }
    {
        const int r = numeric_rank(model.WB());
        add("W_B full row rank", r == n, double(r));
    }
    {
        Mat stacked(model.WB1.rows() + model.WC.rows(), 2 * n);
        stacked << model.WB1, model.WC;
        const int r = numeric_rank(stacked);
        add("rank [WB1; WC] = m + p", r == model.inputs() + model.outputs(), double(r));
    }
    return report;
}

bool ValidationReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

Vec port_vector(const Vec& trace_a, const Vec& trace_b, const PhsModel& model,
                bool apply_H) {
    const int n = model.n;
    if (trace_a.size() != n || trace_b.size() != n)
        throw ConfigError("boundary_ports: trace dimension mismatch");
    Vec wa = trace_a, wb = trace_b;
    if (apply_H) {
        wa = model.H_at(model.a) * wa;
        wb = model.H_at(model.b) * wb;
    }
    Vec ports(2 * n);
    ports.head(n) = kSqrt2Inv * (model.P1 * wb - model.P1 * wa);
    ports.tail(n) = kSqrt2Inv * (wb + wa);
    return ports;
}

BoundaryPorts boundary_ports(const Vec& trace_a, const Vec& trace_b,
                             const PhsModel& model, bool apply_H) {
    const Vec ports = port_vector(trace_a, trace_b, model, apply_H);
    return {ports.head(model.n), ports.tail(model.n)};
}

double energy(const GridFn& state, const PhsModel& model, const Grid1D& grid) {
    if (state.rows() != model.n || state.cols() != grid.nodes())
        throw ConfigError("energy: state dimensions do not match model/grid");
    return inner_energy(state, state, grid, model.H_nodes(grid));
}

namespace {
Vec grid_port_vector(const GridFn& state, const PhsModel& model) {
    return port_vector(state.col(0), state.col(state.cols() - 1), model, true);
}
}  // namespace

Vec input_functional(const GridFn& state, const PhsModel& model) {
    return model.WB1 * grid_port_vector(state, model);
}

Vec output_functional(const GridFn& state, const PhsModel& model) {
    return model.WC * grid_port_vector(state, model);
}

GridFn BoundaryLift::column_on_grid(const Grid1D& grid, int channel) const {
    GridFn out(alpha.rows(), grid.nodes());
    for (int j = 0; j < grid.nodes(); ++j)
        out.col(j) = alpha.col(channel) + grid.node(j) * beta.col(channel);
    return out;
}

BoundaryLift build_boundary_lift(const PhsModel& model, double tol) {
    const int n = model.n;
    const int m = model.inputs();
    const Mat Ha = model.H_at(model.a);
    const Mat Hb = model.H_at(model.b);

    // Ports are linear in the affine coefficients (alpha, beta): assemble the
    // 2n x 2n map (alpha; beta) -> [f; e] once, then solve WB-row constraints
    // channel by channel.
    Mat trace_map(2 * n, 2 * n);  // [w(a); w(b)] from (alpha, beta)
    trace_map.topLeftCorner(n, n) = Ha;
    trace_map.topRightCorner(n, n) = model.a * Ha;
    trace_map.bottomLeftCorner(n, n) = Hb;
    trace_map.bottomRightCorner(n, n) = model.b * Hb;

    Mat port_map(2 * n, 2 * n);  // [f; e] from [w(a); w(b)]
    port_map.topLeftCorner(n, n) = -kSqrt2Inv * model.P1;
    port_map.topRightCorner(n, n) = kSqrt2Inv * model.P1;
    port_map.bottomLeftCorner(n, n) = kSqrt2Inv * Mat::Identity(n, n);
    port_map.bottomRightCorner(n, n) = kSqrt2Inv * Mat::Identity(n, n);

    const Mat constraint = model.WB() * port_map * trace_map;  // n x 2n

    BoundaryLift lift;
    lift.alpha = Mat::Zero(n, m);
    lift.beta = Mat::Zero(n, m);
    for (int j = 0; j < m; ++j) {
        Vec rhs = Vec::Zero(n);
        rhs[j] = 1.0;  // WB1 rows come first in WB()
        const Vec coeffs = constraint.completeOrthogonalDecomposition().solve(rhs);
        const double residual = (constraint * coeffs - rhs).norm();
        if (!(residual <= tol))
            throw NumericalError("boundary lift: no affine profile matches the port "
                                 "identities (residual " + std::to_string(residual) + ")");
        lift.alpha.col(j) = coeffs.head(n);
        lift.beta.col(j) = coeffs.tail(n);
    }
    return lift;
}

GenerationReport generation_check(const PhsModel& model) {
    const int n = model.n;
    Mat sigma = Mat::Zero(2 * n, 2 * n);
    sigma.topRightCorner(n, n) = Mat::Identity(n, n);
    sigma.bottomLeftCorner(n, n) = Mat::Identity(n, n);

    GenerationReport report;
    const Mat wb = model.WB();
    report.product = wb * sigma * wb.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (report.product + report.product.transpose()));
    report.eigenvalues = es.eigenvalues();
    const double scale = std::max(report.product.norm(), 1e-300);
    report.psd = report.eigenvalues.minCoeff() >= -1e-10 * scale;
    return report;
}

}  // namespace sphs
