#include "sphs/noise.hpp"

#include <cmath>

#include "sphs/rng.hpp"

namespace sphs {

namespace {
constexpr uint32_t kChannelStream = 0x20000000u;

void check_q(const Vec& q) {
    if (q.size() < 1) throw ConfigError("noise: need at least one channel");
    for (int i = 0; i < q.size(); ++i)
        if (!(q[i] >= 0.0)) throw ConfigError("noise: variances must be nonnegative");
}
}  // namespace

QWienerSpec QWienerSpec::channel(Vec q, Family family, int component) {
    check_q(q);
    QWienerSpec s;
    s.kind_ = Kind::Channel;
    s.q_ = std::move(q);
    s.family_ = family;
    s.component_ = component;
    return s;
}

QWienerSpec QWienerSpec::channel_scaled_by_H_entry(Vec q, Family family, int component,
                                                   int row, int col) {
    QWienerSpec s = channel(std::move(q), family, component);
    s.scaled_ = true;
    s.scale_row_ = row;
    s.scale_col_ = col;
    return s;
}

QWienerSpec QWienerSpec::grid_profiles(Vec q, std::vector<GridFn> profiles) {
    check_q(q);
    if (int(profiles.size()) != q.size())
        throw ConfigError("noise: one grid profile per channel required");
    QWienerSpec s;
    s.kind_ = Kind::Grid;
    s.q_ = std::move(q);
    s.profiles_ = std::move(profiles);
    return s;
}

QWienerSpec QWienerSpec::modal_pairs(Vec q) {
    check_q(q);
    QWienerSpec s;
    s.kind_ = Kind::ModalPairs;
    s.q_ = std::move(q);
    return s;
}

QWienerSpec QWienerSpec::modal_flat(Vec q, double coupling) {
    check_q(q);
    QWienerSpec s;
    s.kind_ = Kind::ModalFlat;
    s.q_ = std::move(q);
    s.flat_coupling_ = coupling;
    return s;
}

Vec QWienerSpec::power_law(int I, double q0, double r) {
    if (I < 1 || q0 < 0.0 || r <= 1.0)
        throw ConfigError("noise power law: need I >= 1, q0 >= 0, r > 1 (trace class)");
    Vec q(I);
    for (int i = 0; i < I; ++i) q[i] = q0 * std::pow(double(i + 1), -r);
    return q;
}

double QWienerSpec::tail_ratio() const {
    const double tr = trace();
    if (tr <= 0.0) return 0.0;
    return q_[q_.size() - 1] / tr;
}

NoiseValidation validate_noise(const QWienerSpec& spec) {
    NoiseValidation v;
    v.trace = spec.trace();
    v.tail_ratio = spec.tail_ratio();
    v.tail_tol = spec.tail_tolerance();
    v.tail_ok = v.tail_ratio <= v.tail_tol;
    v.nonnegative = true;
    for (int i = 0; i < spec.q().size(); ++i)
        if (spec.q()[i] < 0.0) v.nonnegative = false;
    return v;
}

namespace {

GridFn family_profile(QWienerSpec::Family family, int index, int component, int n,
                      const Grid1D& grid) {
    const double L = grid.b() - grid.a();
    GridFn prof = GridFn::Zero(n, grid.nodes());
    for (int j = 0; j < grid.nodes(); ++j) {
        const double x = grid.node(j) - grid.a();
        double v;
        if (family == QWienerSpec::Family::Sine) {
            v = std::sqrt(2.0 / L) * std::sin((index + 1) * M_PI * x / L);
        } else {
            v = (index == 0) ? std::sqrt(1.0 / L)
                             : std::sqrt(2.0 / L) * std::cos(index * M_PI * x / L);
        }
        prof(component, j) = v;
    }
    return prof;
}

std::vector<GridFn> channel_profiles(const QWienerSpec& spec, const PhsModel& model,
                                     const Grid1D& grid) {
    if (spec.component() < 0 || spec.component() >= model.n)
        throw ConfigError("noise: channel component out of range");
    std::vector<GridFn> out;
    out.reserve(spec.channels());
    for (int i = 0; i < spec.channels(); ++i) {
        GridFn prof = family_profile(spec.family(), i, spec.component(), model.n, grid);
        if (spec.scaled()) {
            for (int j = 0; j < grid.nodes(); ++j)
                prof.col(j) *= model.H_at(grid.node(j))(spec.scale_row(), spec.scale_col());
        }
        out.push_back(std::move(prof));
    }
    return out;
}

}  // namespace

ResolvedNoise resolve_noise(const QWienerSpec& spec, const PhsModel& model,
                            const Grid1D& grid) {
    ResolvedNoise r;
    r.q = spec.q();
    switch (spec.kind()) {
        case QWienerSpec::Kind::Channel:
            r.profiles = channel_profiles(spec, model, grid);
            break;
        case QWienerSpec::Kind::Grid:
            for (const auto& p : spec.raw_profiles())
                if (p.rows() != model.n || p.cols() != grid.nodes())
                    throw ConfigError("noise: grid profile shape mismatch");
            r.profiles = spec.raw_profiles();
            break;
        default:
            throw ConfigError("noise: modal profile rules need a modal basis to resolve");
    }
    return r;
}

ResolvedNoise resolve_noise(const QWienerSpec& spec, const PhsModel& model,
                            const ModalBasis& basis) {
    const Grid1D& grid = basis.grid();
    const int K = basis.size();
    ResolvedNoise r;
    r.q = spec.q();

    switch (spec.kind()) {
        case QWienerSpec::Kind::Channel:
        case QWienerSpec::Kind::Grid: {
            r = resolve_noise(spec, model, grid);
            r.coupling.resize(K, spec.channels());
            for (int i = 0; i < spec.channels(); ++i) {
                const CGridFn prof = r.profiles[i].cast<cplx>();
                for (int k = 0; k < K; ++k) r.coupling(k, i) = basis.coeff(prof, k);
            }
            r.has_coupling = true;
            return r;
        }
        case QWienerSpec::Kind::ModalPairs: {
            // Channel 2j   = Re phi_{k_j} / ||.||_X
            // Channel 2j+1 = Im phi_{k_j} / ||.||_X  (skipped for real modes)
            std::vector<GridFn> profs;
            for (int k = 0; k < K && int(profs.size()) < spec.channels(); ++k) {
                if (basis.lambda(k).imag() < -1e-12) continue;  // one per pair
                GridFn re = basis.phi(k).real();
                const double nre =
                    std::sqrt(inner_energy(re, re, grid, basis.H_nodes()));
                if (nre > 1e-14) profs.push_back(re / nre);
                if (int(profs.size()) >= spec.channels()) break;
                GridFn im = basis.phi(k).imag();
                const double nim =
                    std::sqrt(inner_energy(im, im, grid, basis.H_nodes()));
                if (nim > 1e-14) profs.push_back(im / nim);
            }
            if (int(profs.size()) < spec.channels())
                throw ConfigError("noise: not enough retained modes for the requested "
                                  "modal channel count");
            r.profiles = std::move(profs);
            r.coupling.resize(K, spec.channels());
            for (int i = 0; i < spec.channels(); ++i) {
                const CGridFn prof = r.profiles[i].cast<cplx>();
                for (int k = 0; k < K; ++k) r.coupling(k, i) = basis.coeff(prof, k);
            }
            r.has_coupling = true;
            return r;
        }
        case QWienerSpec::Kind::ModalFlat: {
            r.coupling = CMat::Constant(K, spec.channels(), cplx(spec.flat_coupling(), 0.0));
            r.has_coupling = true;
            // grid realizations of the flat rule (basis-dependent by nature)
            r.profiles.reserve(spec.channels());
            CVec ones = CVec::Constant(K, cplx(spec.flat_coupling(), 0.0));
            const CGridFn rec = basis.reconstruct(ones);
            for (int i = 0; i < spec.channels(); ++i) r.profiles.push_back(rec.real());
            return r;
        }
    }
    throw ConfigError("noise: unknown profile rule");
}

Mat BrownianPath::cumulative() const {
    Mat beta(dW.rows() + 1, dW.cols());
    beta.row(0).setZero();
    for (int s = 0; s < dW.rows(); ++s) beta.row(s + 1) = beta.row(s) + dW.row(s);
    return beta;
}

void brownian_increments(const Vec& q, double dt, uint64_t seed, uint64_t path,
                         int step, double* out) {
    const int I = int(q.size());
    rng::fill_normals(seed, path, uint32_t(step), kChannelStream, I, out);
    for (int i = 0; i < I; ++i) out[i] *= std::sqrt(q[i] * dt);
}

BrownianPath sample_path(const ResolvedNoise& noise, const Vec& times, uint64_t seed,
                         uint64_t path_index) {
    const int S = int(times.size()) - 1;
    if (S < 1) throw ConfigError("sample_path: need at least one step");
    for (int s = 0; s < S; ++s)
        if (!(times[s + 1] > times[s]))
            throw ConfigError("sample_path: time grid must be strictly increasing");
    BrownianPath p;
    p.times = times;
    p.dW.resize(S, noise.q.size());
    std::vector<double> buf(noise.q.size());
    for (int s = 0; s < S; ++s) {
        brownian_increments(noise.q, times[s + 1] - times[s], seed, path_index, s,
                            buf.data());
        for (int i = 0; i < int(noise.q.size()); ++i) p.dW(s, i) = buf[i];
    }
    return p;
}

BrownianPath coarsen_path(const BrownianPath& fine, int factor) {
    const int S = int(fine.dW.rows());
    if (factor < 1 || S % factor != 0)
        throw ConfigError("coarsen_path: factor must divide the step count");
    BrownianPath c;
    const int Sc = S / factor;
    c.times.resize(Sc + 1);
    c.dW = Mat::Zero(Sc, fine.dW.cols());
    for (int s = 0; s <= Sc; ++s) c.times[s] = fine.times[s * factor];
    for (int s = 0; s < Sc; ++s)
        for (int j = 0; j < factor; ++j) c.dW.row(s) += fine.dW.row(s * factor + j);
    return c;
}

double hs_norm_sq(const ResolvedNoise& noise, const PhsModel& model, const Grid1D& grid) {
    if (noise.profiles.empty())
        throw ConfigError("hs_norm_sq: noise has no grid profiles");
    const auto Hn = model.H_nodes(grid);
    double acc = 0.0;
    for (int i = 0; i < int(noise.q.size()); ++i)
        acc += noise.q[i] * inner_energy(noise.profiles[i], noise.profiles[i], grid, Hn);
    return acc;
}

double weighted_trace(const ResolvedNoise& noise, const std::vector<Mat>& weight_nodes,
                      const Grid1D& grid) {
    if (noise.profiles.empty())
        throw ConfigError("weighted_trace: noise has no grid profiles");
    const Vec& w = grid.weights();
    double acc = 0.0;
    for (int i = 0; i < int(noise.q.size()); ++i) {
        const GridFn& f = noise.profiles[i];
        double integral = 0.0;
        for (int j = 0; j < grid.nodes(); ++j)
            integral += w[j] * (f.col(j).transpose() * weight_nodes[j] * f.col(j))(0);
        acc += noise.q[i] * integral;
    }
    return acc;
}

}  // namespace sphs
