#include "sphs/io.hpp"

#include <cinttypes>
#include <cstdio>

namespace sphs {

using nlohmann::json;

namespace {

Mat parse_matrix(const json& j, int rows_hint, int cols, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + ": expected an array");
    std::vector<double> flat;
    int rows = rows_hint;
    if (!j.empty() && j[0].is_array()) {
        rows = int(j.size());
        for (const auto& row : j) {
            if (int(row.size()) != cols)
                throw ConfigError(what + ": row length mismatch");
            for (const auto& v : row) flat.push_back(v.get<double>());
        }
    } else {
        for (const auto& v : j) flat.push_back(v.get<double>());
        if (cols <= 0 || int(flat.size()) % cols != 0)
            throw ConfigError(what + ": flat array length not divisible by columns");
        rows = int(flat.size()) / cols;
    }
    if (rows_hint > 0 && rows != rows_hint)
        throw ConfigError(what + ": expected " + std::to_string(rows_hint) + " rows");
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = flat[size_t(r) * cols + c];
    return m;
}

}  // namespace

PhsModel parse_model_json(const json& j) {
    PhsModel m;
    m.n = j.at("n").get<int>();
    m.a = j.at("a").get<double>();
    m.b = j.at("b").get<double>();
    m.P0 = parse_matrix(j.at("P0"), m.n, m.n, "P0");
    m.P1 = parse_matrix(j.at("P1"), m.n, m.n, "P1");
    const json& h = j.at("hamiltonian");
    const std::string type = h.at("type").get<std::string>();
    if (type == "constant") {
        m.hamiltonian = HamiltonianDensity::constant(
            parse_matrix(h.at("data"), m.n, m.n, "hamiltonian"));
    } else if (type == "grid") {
        std::vector<double> zeta = h.at("zeta").get<std::vector<double>>();
        std::vector<Mat> values;
        for (const auto& sample : h.at("values"))
            values.push_back(parse_matrix(sample, m.n, m.n, "hamiltonian sample"));
        m.hamiltonian = HamiltonianDensity::on_grid(std::move(zeta), std::move(values));
    } else {
        throw ConfigError("hamiltonian: unknown type '" + type + "'");
    }
    m.WB1 = parse_matrix(j.at("WB1"), -1, 2 * m.n, "WB1");
    m.WB2 = parse_matrix(j.at("WB2"), -1, 2 * m.n, "WB2");
    m.WC = parse_matrix(j.at("WC"), -1, 2 * m.n, "WC");
    return m;
}

QWienerSpec parse_noise_json(const json& j) {
    const int I = j.at("I").get<int>();
    Vec q;
    const json& qj = j.at("q");
    const std::string qtype = qj.at("type").get<std::string>();
    if (qtype == "power") {
        q = QWienerSpec::power_law(I, qj.at("q0").get<double>(), qj.at("r").get<double>());
    } else if (qtype == "explicit") {
        std::vector<double> vals = qj.at("values").get<std::vector<double>>();
        if (int(vals.size()) != I) throw ConfigError("noise: q values size != I");
        q = Eigen::Map<Vec>(vals.data(), I);
    } else {
        throw ConfigError("noise: unknown q type '" + qtype + "'");
    }

    const std::string basis = j.at("basis").get<std::string>();
    QWienerSpec spec = QWienerSpec::channel(q, QWienerSpec::Family::Sine, 0);
    if (basis == "sine" || basis == "cosine") {
        const auto family = basis == "sine" ? QWienerSpec::Family::Sine
                                            : QWienerSpec::Family::Cosine;
        const int component = j.value("channel", 0);
        if (j.contains("scale")) {
            const json& s = j.at("scale");
            const std::string stype = s.at("type").get<std::string>();
            if (stype == "h_entry") {
                spec = QWienerSpec::channel_scaled_by_H_entry(
                    q, family, component, s.at("row").get<int>(), s.at("col").get<int>());
            } else if (stype == "none") {
                spec = QWienerSpec::channel(q, family, component);
            } else {
                throw ConfigError("noise: unknown scale type '" + stype + "'");
            }
        } else {
            spec = QWienerSpec::channel(q, family, component);
        }
    } else if (basis == "grid") {
        std::vector<GridFn> profiles;
        for (const auto& p : j.at("profiles"))
            profiles.push_back(parse_matrix(p, -1, int(p[0].size()), "noise profile"));
        spec = QWienerSpec::grid_profiles(q, std::move(profiles));
    } else if (basis == "modal") {
        spec = QWienerSpec::modal_pairs(q);
    } else if (basis == "modal-flat") {
        spec = QWienerSpec::modal_flat(q, j.at("coeff").get<double>());
    } else {
        throw ConfigError("noise: unknown basis '" + basis + "'");
    }
    spec.set_tail_tolerance(j.value("tail_tol", 1e-6));
    return spec;
}

InputSignal parse_input_json(const json& j, int m) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "zero") return InputSignal::zero(m);
    if (type == "constant") {
        std::vector<double> v = j.at("value").get<std::vector<double>>();
        if (int(v.size()) != m) throw ConfigError("input: value size != m");
        return InputSignal::constant(Eigen::Map<Vec>(v.data(), m));
    }
    if (type == "sine") {
        auto amp = j.at("amp").get<std::vector<double>>();
        auto omega = j.at("omega").get<std::vector<double>>();
        auto phase = j.at("phase").get<std::vector<double>>();
        if (int(amp.size()) != m) throw ConfigError("input: amp size != m");
        return InputSignal::sine(Eigen::Map<Vec>(amp.data(), m),
                                 Eigen::Map<Vec>(omega.data(), m),
                                 Eigen::Map<Vec>(phase.data(), m));
    }
    throw ConfigError("input: unknown type '" + type + "'");
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    RunConfig rc;
    rc.raw = j;

    const json& mj = j.at("model");
    const std::string mtype = mj.at("type").get<std::string>();
    if (mtype == "string") {
        rc.is_string = true;
        rc.string_params = StringParams{mj.at("rho").get<double>(),
                                        mj.at("T").get<double>(),
                                        mj.at("a").get<double>(),
                                        mj.at("b").get<double>()};
        StringModel sm = build_string_model(rc.string_params);
        rc.model = std::move(sm.model);
        rc.lift = std::move(sm.lift);
        rc.has_lift = true;
    } else if (mtype == "inline") {
        rc.model = parse_model_json(mj);
    } else if (mtype == "file") {
        const auto path = base_dir / mj.at("path").get<std::string>();
        rc.model = parse_model_json(json::parse(read_file(path)));
    } else {
        throw ConfigError("model: unknown type '" + mtype + "'");
    }
    if (!rc.is_string) {
        try {
            rc.lift = build_boundary_lift(rc.model);
            rc.has_lift = true;
        } catch (const NumericalError&) {
            rc.has_lift = false;
        }
    }

    json noise_json = j.at("noise");
    if (noise_json.contains("profiles_path")) {
        const auto path = base_dir / noise_json.at("profiles_path").get<std::string>();
        noise_json["profiles"] = json::parse(read_file(path));
        noise_json.erase("profiles_path");
    }
    rc.noise = parse_noise_json(noise_json);

    const json& sj = j.at("sim");
    rc.sim.K = sj.at("K").get<int>();
    rc.sim.N = sj.at("N").get<int>();
    rc.sim.dt = sj.at("dt").get<double>();
    rc.sim.t_final = sj.at("t_final").get<double>();
    rc.sim.paths = sj.at("paths").get<int64_t>();
    if (!sj.contains("seed")) throw ConfigError("sim: seed is mandatory");
    rc.sim.seed = sj.at("seed").get<uint64_t>();
    const std::string scheme = sj.value("scheme", "exact-gaussian");
    if (scheme == "exact-gaussian")
        rc.sim.scheme = Scheme::ExactGaussian;
    else if (scheme == "increment")
        rc.sim.scheme = Scheme::Increment;
    else
        throw ConfigError("sim: unknown scheme '" + scheme + "'");
    rc.sim.output_points = sj.value("output_points", 11);
    if (!(rc.sim.dt > 0.0)) throw ConfigError("sim: dt must be positive");
    if (rc.sim.K > rc.sim.N / 4) throw ConfigError("sim: K must satisfy K <= N/4");

    rc.input = parse_input_json(j.value("input", json{{"type", "zero"}}),
                                rc.model.inputs());
    rc.x0_spec = j.value("x0", json{{"type", "zero"}});
    return rc;
}

RunConfig load_config(const std::string& path) {
    const std::filesystem::path p(path);
    json j;
    try {
        j = json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    try {
        return parse_config(j, p.parent_path());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
}

CVec parse_x0(const json& j, const ModalBasis& basis) {
    const int K = basis.size();
    const std::string type = j.at("type").get<std::string>();
    if (type == "zero") return CVec::Zero(K);
    if (type == "modal") {
        CVec x0 = CVec::Zero(K);
        const auto& coeffs = j.at("coeffs");
        for (int k = 0; k < K && k < int(coeffs.size()); ++k)
            x0[k] = cplx(coeffs[k][0].get<double>(), coeffs[k][1].get<double>());
        return x0;
    }
    if (type == "modal-decay") {
        const double scale = j.value("scale", 1.0);
        const double rate = j.value("rate", 2.0);
        CVec x0(K);
        for (int k = 0; k < K; ++k) {
            const double im = basis.lambda(k).imag();
            const double w = scale / std::pow(1.0 + std::abs(im), rate);
            if (std::abs(im) <= 1e-12)
                x0[k] = cplx(w, 0.0);
            else if (im > 0.0)
                x0[k] = cplx(w * M_SQRT1_2, w * M_SQRT1_2);
            else
                x0[k] = std::conj(x0[k - 1]);
        }
        return x0;
    }
    throw ConfigError("x0: unknown type '" + type + "'");
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string hex64(uint64_t value) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, value);
    return buf;
}

std::string fmt_float(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", value);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& config_hash) {
    out_.open(path);
    if (!out_) throw ConfigError("cannot open output file " + path.string());
    out_ << "# config_hash=" << config_hash << "\n";
}

void CsvWriter::header(const std::vector<std::string>& names) {
    for (size_t i = 0; i < names.size(); ++i)
        out_ << (i ? "," : "") << names[i];
    out_ << "\n";
}

void CsvWriter::begin_row() { first_in_row_ = true; }

void CsvWriter::field(const std::string& text) {
    if (!first_in_row_) out_ << ",";
    out_ << text;
    first_in_row_ = false;
}

void CsvWriter::field_float(double value) { field(fmt_float(value)); }
void CsvWriter::field_int(int64_t value) { field(std::to_string(value)); }

void CsvWriter::end_row() { out_ << "\n"; }

std::filesystem::path prepare_run_dir(const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    if (std::filesystem::exists(dir)) {
        if (!std::filesystem::is_directory(dir))
            throw ConfigError("output path exists and is not a directory: " + out_dir);
        if (!std::filesystem::is_empty(dir))
            throw ConfigError("output directory is not empty (one directory per run): " +
                              out_dir);
    } else {
        std::filesystem::create_directories(dir);
    }
    return dir;
}

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const std::string& config_hash, uint64_t seed, int workers,
                    const std::vector<std::string>& outputs, const json& extra) {
    // worker count deliberately not recorded: artifacts must be byte-identical
    // for any scheduling, and the manifest is an artifact
    (void)workers;
    json m;
    m["command"] = command;
    m["config_hash"] = config_hash;
    m["seed"] = seed;
    m["version"] = "sphs 0.1.0";
    m["outputs"] = outputs;
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    write_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file " + path.string());
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file " + path.string());
    out << bytes;
}

}  // namespace sphs
