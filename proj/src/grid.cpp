#include "sphs/grid.hpp"

namespace sphs {

Grid1D::Grid1D(double a, double b, int num_intervals)
    : a_(a), b_(b), num_intervals_(num_intervals) {
    if (!(b > a)) throw ConfigError("grid: interval endpoints must satisfy a < b");
    if (num_intervals < 2) throw ConfigError("grid: need at least 2 intervals");
    h_ = (b - a) / num_intervals;
    nodes_.resize(num_intervals + 1);
    node_vec_.resize(num_intervals + 1);
    weights_.resize(num_intervals + 1);
    for (int j = 0; j <= num_intervals; ++j) {
        nodes_[j] = (j == num_intervals) ? b : a + j * h_;
        node_vec_[j] = nodes_[j];
        weights_[j] = (j == 0 || j == num_intervals) ? 0.5 * h_ : h_;
    }
}

double Grid1D::integrate(const Vec& samples) const {
    return weights_.dot(samples);
}

cplx inner_energy(const CGridFn& x, const CGridFn& y, const Grid1D& grid,
                  const std::vector<Mat>& H_nodes) {
    cplx acc = 0.0;
    const Vec& w = grid.weights();
    for (int j = 0; j < grid.nodes(); ++j)
        acc += w[j] * (y.col(j).adjoint() * H_nodes[j] * x.col(j))(0);
    return 0.5 * acc;
}

double inner_energy(const GridFn& x, const GridFn& y, const Grid1D& grid,
                    const std::vector<Mat>& H_nodes) {
    double acc = 0.0;
    const Vec& w = grid.weights();
    for (int j = 0; j < grid.nodes(); ++j)
        acc += w[j] * (y.col(j).transpose() * H_nodes[j] * x.col(j))(0);
    return 0.5 * acc;
}

double norm_energy_sq(const CGridFn& x, const Grid1D& grid,
                      const std::vector<Mat>& H_nodes) {
    double acc = 0.0;
    const Vec& w = grid.weights();
    for (int j = 0; j < grid.nodes(); ++j)
        acc += w[j] * (x.col(j).adjoint() * H_nodes[j] * x.col(j))(0).real();
    return 0.5 * acc;
}

double inner_l2(const GridFn& x, const GridFn& y, const Grid1D& grid) {
    double acc = 0.0;
    const Vec& w = grid.weights();
    for (int j = 0; j < grid.nodes(); ++j) acc += w[j] * y.col(j).dot(x.col(j));
    return acc;
}

}  // namespace sphs
