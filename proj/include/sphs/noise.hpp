#pragma once

#include <string>
#include <vector>

#include "sphs/model.hpp"
#include "sphs/spectral.hpp"
#include "sphs/types.hpp"

namespace sphs {

// Q-Wiener noise specification: channel variances q_i plus the rule mapping
// the abstract noise directions to state-space profiles H f_i.
//
// Profile rules:
//   Channel    - orthonormal spatial family (sine/cosine) injected into one
//                state component, optionally scaled by an entry of H(z)
//                (the wave-equation 1/rho variant uses entry (0,0)).
//   Grid       - profiles handed in explicitly on the quadrature grid.
//   ModalPairs - band-limited profiles built from Re/Im parts of the first
//                eigenfunctions (exactly captured by the retained modes).
//   ModalFlat  - flat modal coupling h_ki = c for every retained mode; the
//                white-in-space surrogate used by the admissibility
//                diagnostics (divergent by construction).
class QWienerSpec {
  public:
    enum class Kind { Channel, Grid, ModalPairs, ModalFlat };
    enum class Family { Sine, Cosine };

    static QWienerSpec channel(Vec q, Family family, int component);
    static QWienerSpec channel_scaled_by_H_entry(Vec q, Family family, int component,
                                                 int row, int col);
    static QWienerSpec grid_profiles(Vec q, std::vector<GridFn> profiles);
    static QWienerSpec modal_pairs(Vec q);
    static QWienerSpec modal_flat(Vec q, double coupling);

    static Vec power_law(int I, double q0, double r);

    int channels() const { return int(q_.size()); }
    const Vec& q() const { return q_; }
    double trace() const { return q_.sum(); }
    double tail_ratio() const;
    Kind kind() const { return kind_; }
    double tail_tolerance() const { return tail_tol_; }
    void set_tail_tolerance(double tol) { tail_tol_ = tol; }

    // accessors used by the io layer
    Family family() const { return family_; }
    int component() const { return component_; }
    bool scaled() const { return scaled_; }
    int scale_row() const { return scale_row_; }
    int scale_col() const { return scale_col_; }
    double flat_coupling() const { return flat_coupling_; }
    const std::vector<GridFn>& raw_profiles() const { return profiles_; }

  private:
    Kind kind_ = Kind::Channel;
    Vec q_;
    Family family_ = Family::Sine;
    int component_ = 0;
    bool scaled_ = false;
    int scale_row_ = 0, scale_col_ = 0;
    std::vector<GridFn> profiles_;
    double flat_coupling_ = 0.0;
    double tail_tol_ = 1e-6;
};

struct NoiseValidation {
    double trace = 0.0;
    double tail_ratio = 0.0;
    double tail_tol = 0.0;
    bool tail_ok = false;
    bool nonnegative = false;
    bool pass() const { return tail_ok && nonnegative; }
};

NoiseValidation validate_noise(const QWienerSpec& spec);

// Noise resolved against a model/grid (and a modal basis when the profile
// rule or the coupling matrix needs one). Immutable and shareable between
// worker threads.
struct ResolvedNoise {
    Vec q;                         // I
    std::vector<GridFn> profiles;  // H f_i on the grid (empty for ModalFlat)
    CMat coupling;                 // K x I, h(k,i) = <H f_i, psi_k>_X (if basis given)
    bool has_coupling = false;
};

ResolvedNoise resolve_noise(const QWienerSpec& spec, const PhsModel& model,
                            const Grid1D& grid);
ResolvedNoise resolve_noise(const QWienerSpec& spec, const PhsModel& model,
                            const ModalBasis& basis);

// Driving Brownian increments on a time grid: dW(s,i) ~ N(0, q_i dt_s),
// reproducible from (seed, path) alone.
struct BrownianPath {
    Vec times;  // S+1 points
    Mat dW;     // S x I increments
    Mat cumulative() const;  // (S+1) x I, beta_i(t_s), beta(0) = 0
};

// One increment block, identical to the corresponding BrownianPath entries.
void brownian_increments(const Vec& q, double dt, uint64_t seed, uint64_t path,
                         int step, double* out);

BrownianPath sample_path(const ResolvedNoise& noise, const Vec& times, uint64_t seed,
                         uint64_t path_index);

// Aggregates blocks of `factor` fine increments; the refinement studies run
// several step sizes off one fine path.
BrownianPath coarsen_path(const BrownianPath& fine, int factor);

// Tr[H Q H*] in the energy norm: sum_i q_i ||H f_i||_X^2.
double hs_norm_sq(const ResolvedNoise& noise, const PhsModel& model, const Grid1D& grid);

// sum_i q_i integral (H f_i)^T weight(z) (H f_i) dz  (plain L2 weight, no 1/2).
double weighted_trace(const ResolvedNoise& noise, const std::vector<Mat>& weight_nodes,
                      const Grid1D& grid);

}  // namespace sphs
