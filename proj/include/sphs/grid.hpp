#pragma once

#include <vector>

#include "sphs/types.hpp"

namespace sphs {

// Uniform 1-D grid on [a,b] with N intervals (N+1 nodes) and composite
// trapezoid quadrature. All spatial integrals in the toolkit go through the
// weights held here so that every module sees the same quadrature rule.
class Grid1D {
  public:
    Grid1D(double a, double b, int num_intervals);

    double a() const { return a_; }
    double b() const { return b_; }
    int intervals() const { return num_intervals_; }
    int nodes() const { return num_intervals_ + 1; }
    double spacing() const { return h_; }

    double node(int j) const { return nodes_[j]; }
    const Vec& node_vector() const { return node_vec_; }

    // Trapezoid weights w_j, so that integral(f) = sum_j w_j f(zeta_j).
    const Vec& weights() const { return weights_; }

    // integral of a scalar sample vector (size nodes()).
    double integrate(const Vec& samples) const;

  private:
    double a_, b_, h_;
    int num_intervals_;
    std::vector<double> nodes_;
    Vec node_vec_;
    Vec weights_;
};

// Energy inner product <x,y>_X = (1/2) * integral of y(z)^H Hsp(z) x(z) dz,
// conjugate-linear in the second argument. Hsp holds the Hamiltonian density
// sampled per node (each block n x n).
cplx inner_energy(const CGridFn& x, const CGridFn& y, const Grid1D& grid,
                  const std::vector<Mat>& H_nodes);
double inner_energy(const GridFn& x, const GridFn& y, const Grid1D& grid,
                    const std::vector<Mat>& H_nodes);

double norm_energy_sq(const CGridFn& x, const Grid1D& grid,
                      const std::vector<Mat>& H_nodes);

// Plain (unweighted) L2 inner product on grid functions.
double inner_l2(const GridFn& x, const GridFn& y, const Grid1D& grid);

}  // namespace sphs
