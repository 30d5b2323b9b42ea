// sphs: batch front end for the stochastic port-Hamiltonian toolkit.
//
// Subcommands: validate, spectrum, simulate, moments, energy, ito, wellposed,
// yosida. Every run writes its artifacts plus a manifest into a fresh output
// directory; artifacts are byte-identical for a fixed (config, seed) no matter
// how many workers are used.
//
// Exit codes: 0 success, 1 validation/condition failure, 2 numerical failure,
// 3 configuration error.

#include <CLI11.hpp>
#include <clocale>
#include <iostream>

#include "sphs/diagnostics.hpp"
#include "sphs/ensemble.hpp"
#include "sphs/io.hpp"
#include "sphs/moments.hpp"

namespace {

using namespace sphs;
using nlohmann::json;

struct CliArgs {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_given = false;
    int workers = 0;
};

struct Loaded {
    RunConfig cfg;
    std::string hash;
    std::filesystem::path out;
};

Loaded load(const CliArgs& args) {
    Loaded l;
    l.cfg = load_config(args.config_path);
    l.hash = hex64(fnv1a64(read_file(args.config_path)));
    l.out = prepare_run_dir(args.out_dir);
    return l;
}

uint64_t effective_seed(const CliArgs& args, const RunConfig& cfg) {
    return args.seed_given ? args.seed : cfg.sim.seed;
}

struct BasisBundle {
    DiscreteGenerator disc;
    ModalBasis basis;
    ResolvedNoise noise;
};

BasisBundle build_basis(const RunConfig& cfg) {
    BasisBundle b{discretize_operator(cfg.model, cfg.sim.N), ModalBasis{}, {}};
    b.basis = eigensystem(cfg.model, b.disc, cfg.sim.K);
    b.noise = resolve_noise(cfg.noise, cfg.model, b.basis);
    return b;
}

std::vector<int> output_marks(const SimConfig& sim) {
    const int steps = sim.steps();
    const int P = std::max(2, sim.output_points);
    std::vector<int> marks;
    for (int j = 0; j < P; ++j) {
        const int m = int(std::llround(double(j) * steps / (P - 1)));
        if (marks.empty() || m != marks.back()) marks.push_back(m);
    }
    return marks;
}

int cmd_validate(const CliArgs& args) {
    Loaded l = load(args);
    const ValidationReport report = validate_model(l.cfg.model);
    const GenerationReport gen = generation_check(l.cfg.model);
    const NoiseValidation nv = validate_noise(l.cfg.noise);

    json out;
    out["config_hash"] = l.hash;
    out["checks"] = json::array();
    for (const auto& c : report.checks)
        out["checks"].push_back({{"name", c.name},
                                 {"pass", c.pass},
                                 {"measured", c.measured},
                                 {"detail", c.detail}});
    out["h_bounds"] = {{"m", report.h_lower}, {"M", report.h_upper}};
    json gj;
    gj["psd"] = gen.psd;
    gj["eigenvalues"] = std::vector<double>(gen.eigenvalues.data(),
                                            gen.eigenvalues.data() + gen.eigenvalues.size());
    std::vector<std::vector<double>> prod;
    for (int r = 0; r < gen.product.rows(); ++r) {
        std::vector<double> row;
        for (int c = 0; c < gen.product.cols(); ++c) row.push_back(gen.product(r, c));
        prod.push_back(row);
    }
    gj["product"] = prod;
    out["generation"] = gj;
    out["noise"] = {{"trace", nv.trace},
                    {"tail_ratio", nv.tail_ratio},
                    {"tail_tol", nv.tail_tol},
                    {"pass", nv.pass()}};
    const bool all = report.all_pass() && gen.psd && nv.pass();
    out["all_pass"] = all;
    write_file(l.out / "validate.json", out.dump(2) + "\n");
    write_manifest(l.out, "validate", l.hash, effective_seed(args, l.cfg), args.workers,
                   {"validate.json"});
    return all ? 0 : 1;
}

int cmd_spectrum(const CliArgs& args) {
    Loaded l = load(args);
    BasisBundle b = build_basis(l.cfg);
    CsvWriter csv(l.out / "spectrum.csv", l.hash);
    csv.header({"k", "re_lambda", "im_lambda", "gap", "biorthogonality_defect"});
    for (int k = 0; k < b.basis.size(); ++k) {
        csv.begin_row();
        csv.field_int(k);
        csv.field_float(b.basis.lambda(k).real());
        csv.field_float(b.basis.lambda(k).imag());
        csv.field_float(b.basis.gap());
        csv.field_float(b.basis.biorthogonality_defect());
        csv.end_row();
    }
    write_manifest(l.out, "spectrum", l.hash, effective_seed(args, l.cfg), args.workers,
                   {"spectrum.csv"},
                   {{"nice", b.basis.nice()}, {"nice_message", b.basis.nice_message()}});
    return b.basis.nice() ? 0 : 1;
}

int cmd_simulate(const CliArgs& args) {
    Loaded l = load(args);
    BasisBundle b = build_basis(l.cfg);
    const uint64_t seed = effective_seed(args, l.cfg);
    const TimeGrid tg = l.cfg.sim.time_grid();
    const CVec x0 = parse_x0(l.cfg.x0_spec, b.basis);

    const BoundaryLift* lift = l.cfg.has_lift ? &l.cfg.lift : nullptr;
    const InputSignal* input = l.cfg.has_lift ? &l.cfg.input : nullptr;
    MildSimulator sim(l.cfg.model, b.basis, b.noise, tg, l.cfg.sim.scheme, lift, input);

    const std::vector<int> marks = output_marks(l.cfg.sim);
    const int M = int(marks.size());
    const int K = b.basis.size();
    const int64_t paths = std::max<int64_t>(1, l.cfg.sim.paths);

    std::vector<CMat> slices(static_cast<size_t>(paths));
    parallel_paths(paths, args.workers, [&](int64_t p) {
        CMat slice(K, M);
        int next = 0;
        sim.run_with(seed, uint64_t(p), x0, [&](int s, double, const CVec& x) {
            while (next < M && s == marks[next]) slice.col(next++) = x;
        });
        slices[size_t(p)] = std::move(slice);
    });

    CsvWriter csv(l.out / "trajectory.csv", l.hash);
    std::vector<std::string> head{"t", "path_index"};
    for (int k = 0; k < K; ++k) {
        head.push_back("re_x" + std::to_string(k));
        head.push_back("im_x" + std::to_string(k));
    }
    head.push_back("energy");
    for (int c = 0; c < l.cfg.model.outputs(); ++c)
        head.push_back("y" + std::to_string(c));
    csv.header(head);

    ModalTrajectory tmp;
    tmp.times.resize(M);
    for (int j = 0; j < M; ++j) tmp.times[j] = marks[j] * tg.dt;
    for (int64_t p = 0; p < paths; ++p) {
        tmp.states = slices[size_t(p)];
        const ReconstructionResult rec =
            reconstruct_epsilon(tmp, b.basis, l.cfg.model, lift, input);
        for (int j = 0; j < M; ++j) {
            csv.begin_row();
            csv.field_float(tmp.times[j]);
            csv.field_int(p);
            for (int k = 0; k < K; ++k) {
                csv.field_float(slices[size_t(p)](k, j).real());
                csv.field_float(slices[size_t(p)](k, j).imag());
            }
            csv.field_float(rec.energies[j]);
            for (int c = 0; c < l.cfg.model.outputs(); ++c)
                csv.field_float(rec.outputs(c, j));
            csv.end_row();
        }
    }
    write_manifest(l.out, "simulate", l.hash, seed, args.workers, {"trajectory.csv"},
                   {{"udot", sim.finite_difference_udot() ? "finite-difference"
                                                          : "analytic"}});
    return 0;
}

int cmd_moments(const CliArgs& args) {
    Loaded l = load(args);
    BasisBundle b = build_basis(l.cfg);
    const TimeGrid tg = l.cfg.sim.time_grid();
    const CVec m0 = parse_x0(l.cfg.x0_spec, b.basis);
    const BoundaryLift* lift = l.cfg.has_lift ? &l.cfg.lift : nullptr;
    const InputSignal* input = l.cfg.has_lift ? &l.cfg.input : nullptr;

    const ModalTrajectory mean =
        mean_trajectory(l.cfg.model, b.basis, lift, input, m0, tg);
    const double rate = energy_rate(l.cfg.model, b.noise, b.basis.grid());
    const std::vector<int> marks = output_marks(l.cfg.sim);
    const int K = b.basis.size();

    CsvWriter csv(l.out / "moments.csv", l.hash);
    std::vector<std::string> head{"t"};
    for (int k = 0; k < K; ++k) head.push_back("re_m" + std::to_string(k));
    for (int k = 0; k < K; ++k) head.push_back("im_m" + std::to_string(k));
    for (int k = 0; k < K; ++k) head.push_back("P" + std::to_string(k) + std::to_string(k));
    head.push_back("trace_P");
    head.push_back("energy_rate");
    csv.header(head);
    for (int mark : marks) {
        const double t = mark * tg.dt;
        const CMat P = covariance_exact(b.basis, b.noise, CMat(), t);
        csv.begin_row();
        csv.field_float(t);
        for (int k = 0; k < K; ++k) csv.field_float(mean.states(k, mark).real());
        for (int k = 0; k < K; ++k) csv.field_float(mean.states(k, mark).imag());
        for (int k = 0; k < K; ++k) csv.field_float(P(k, k).real());
        csv.field_float(P.trace().real());
        csv.field_float(rate);
        csv.end_row();
    }
    write_manifest(l.out, "moments", l.hash, effective_seed(args, l.cfg), args.workers,
                   {"moments.csv"});
    return 0;
}

int cmd_energy(const CliArgs& args) {
    Loaded l = load(args);
    BasisBundle b = build_basis(l.cfg);
    const uint64_t seed = effective_seed(args, l.cfg);
    const TimeGrid tg = l.cfg.sim.time_grid();
    const json block = l.cfg.raw.value("energy", json::object());
    double w1 = 0.25 * tg.t_final(), w2 = tg.t_final();
    if (block.contains("window")) {
        w1 = block["window"][0].get<double>();
        w2 = block["window"][1].get<double>();
    }
    const CVec x0 = parse_x0(l.cfg.x0_spec, b.basis);
    const int paths = int(block.value("paths", int64_t(l.cfg.sim.paths)));
    const EnergyBalanceReport rep = energy_balance_check(
        l.cfg.model, b.basis, b.noise, tg, w1, w2, x0, paths, seed, args.workers);

    json out;
    out["config_hash"] = l.hash;
    out["window"] = {rep.window_start, rep.window_end};
    out["mc_drift"] = rep.mc_drift;
    out["mc_se"] = rep.mc_se;
    out["expected_rate"] = rep.expected_rate;
    out["paths"] = rep.paths;
    out["pass"] = rep.ok;
    write_file(l.out / "energy.json", out.dump(2) + "\n");
    write_manifest(l.out, "energy", l.hash, seed, args.workers, {"energy.json"});
    return rep.ok ? 0 : 1;
}

int cmd_ito(const CliArgs& args) {
    Loaded l = load(args);
    BasisBundle b = build_basis(l.cfg);
    const uint64_t seed = effective_seed(args, l.cfg);
    const json block = l.cfg.raw.value("ito", json::object());
    const double t = block.value("t", l.cfg.sim.t_final);
    const int paths = int(block.value("paths", int64_t(l.cfg.sim.paths)));
    const int steps = block.value("steps", 200);
    const ItoIsometryReport rep = ito_isometry_check(l.cfg.model, b.basis, b.noise, t,
                                                     steps, paths, seed, args.workers);
    json out;
    out["config_hash"] = l.hash;
    out["paths"] = rep.paths;
    out["t"] = rep.t;
    out["flat"] = {{"mc", rep.flat_mc},
                   {"se", rep.flat_se},
                   {"expected", rep.flat_expected},
                   {"pass", rep.flat_ok}};
    out["convolution"] = {{"mc", rep.conv_mc},
                          {"se", rep.conv_se},
                          {"expected", rep.conv_expected},
                          {"pass", rep.conv_ok}};
    write_file(l.out / "ito.json", out.dump(2) + "\n");
    write_manifest(l.out, "ito", l.hash, seed, args.workers, {"ito.json"});
    return (rep.flat_ok && rep.conv_ok) ? 0 : 1;
}

int cmd_wellposed(const CliArgs& args) {
    Loaded l = load(args);
    if (!l.cfg.has_lift)
        throw ConfigError("wellposed: the model has no boundary lift");
    BasisBundle b = build_basis(l.cfg);
    const json block = l.cfg.raw.value("wellposed", json::object());
    WellposednessOptions opt;
    opt.seed = effective_seed(args, l.cfg);
    opt.workers = args.workers;
    opt.dt = l.cfg.sim.dt;
    opt.scheme = Scheme::Increment;
    if (block.contains("tf_grid"))
        opt.tf_grid = block["tf_grid"].get<std::vector<double>>();
    opt.members = block.value("members", 20);
    opt.paths_per_member = block.value("paths_per_member", 128);

    const WellposednessReport rep = wellposedness_ratio(l.cfg.model, b.basis, l.cfg.lift,
                                                        b.noise, l.cfg.noise, opt);
    json out;
    out["config_hash"] = l.hash;
    out["conditions"] = rep.conditions;
    out["tf_grid"] = std::vector<double>(rep.tf_grid.data(),
                                         rep.tf_grid.data() + rep.tf_grid.size());
    out["ratios"] = std::vector<double>(rep.max_ratios.data(),
                                        rep.max_ratios.data() + rep.max_ratios.size());
    std::vector<std::vector<double>> members;
    for (int i = 0; i < rep.member_ratios.rows(); ++i) {
        std::vector<double> row;
        for (int j = 0; j < rep.member_ratios.cols(); ++j)
            row.push_back(rep.member_ratios(i, j));
        members.push_back(row);
    }
    out["member_ratios"] = members;
    out["growth_exponent"] = rep.growth_exponent;
    out["verdict"] = rep.bounded_verdict ? "consistent with well-posedness"
                                         : "growth beyond tolerance";
    out["ensemble"] = rep.ensemble_description;
    out["limitation"] = rep.limitation;
    write_file(l.out / "wellposed.json", out.dump(2) + "\n");
    write_manifest(l.out, "wellposed", l.hash, opt.seed, args.workers,
                   {"wellposed.json"});
    bool conditions_ok = true;
    for (const auto& [name, ok] : rep.conditions) conditions_ok = conditions_ok && ok;
    return (conditions_ok && rep.bounded_verdict) ? 0 : 1;
}

int cmd_yosida(const CliArgs& args) {
    Loaded l = load(args);
    if (!l.cfg.has_lift) throw ConfigError("yosida: the model has no boundary lift");
    BasisBundle b = build_basis(l.cfg);
    const uint64_t seed = effective_seed(args, l.cfg);
    const json block = l.cfg.raw.value("yosida", json::object());
    std::vector<double> lambdas =
        block.value("lambdas", std::vector<double>{10.0, 100.0, 1000.0, 10000.0});
    const int paths = int(block.value("paths", int64_t(l.cfg.sim.paths)));
    const TimeGrid tg = l.cfg.sim.time_grid();
    const CVec x0 = parse_x0(l.cfg.x0_spec, b.basis);
    const Vec u0 = l.cfg.input.u(0.0);

    const YosidaLadderReport rep =
        yosida_ladder(l.cfg.model, b.basis, l.cfg.lift, b.noise, l.cfg.input, lambdas,
                      tg, l.cfg.sim.scheme, u0, x0, paths, seed, args.workers);
    json out;
    out["config_hash"] = l.hash;
    out["lambdas"] = std::vector<double>(rep.lambdas.data(),
                                         rep.lambdas.data() + rep.lambdas.size());
    out["sup_errors"] = std::vector<double>(
        rep.sup_errors.data(), rep.sup_errors.data() + rep.sup_errors.size());
    out["monotone"] = rep.monotone;
    write_file(l.out / "yosida.json", out.dump(2) + "\n");
    write_manifest(l.out, "yosida", l.hash, seed, args.workers, {"yosida.json"});
    return rep.monotone ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");
    CLI::App app{"stochastic port-Hamiltonian simulation and verification toolkit"};
    app.require_subcommand(1);

    CliArgs args;
    const std::vector<std::pair<std::string, int (*)(const CliArgs&)>> commands = {
        {"validate", cmd_validate}, {"spectrum", cmd_spectrum},
        {"simulate", cmd_simulate}, {"moments", cmd_moments},
        {"energy", cmd_energy},     {"ito", cmd_ito},
        {"wellposed", cmd_wellposed}, {"yosida", cmd_yosida}};

    for (const auto& [name, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", args.config_path, "config JSON path")
            ->required()
            ->envname("SPHS_CONFIG");
        sub->add_option("--out", args.out_dir, "output directory (fresh per run)")
            ->required()
            ->envname("SPHS_OUT");
        sub->add_option("--seed", args.seed, "seed override")
            ->envname("SPHS_SEED")
            ->each([&](const std::string&) { args.seed_given = true; });
        sub->add_option("--workers", args.workers, "worker threads (0 = auto)")
            ->envname("SPHS_WORKERS");
        sub->callback([&args, fn = fn]() {
            const int code = fn(args);
            if (code != 0) std::exit(code);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    } catch (const sphs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const sphs::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
