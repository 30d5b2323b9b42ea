#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sys/wait.h>
#include <unistd.h>

#include "sphs/ensemble.hpp"
#include "sphs/io.hpp"
#include "test_helpers.hpp"

using namespace sphs;
using namespace sphs_test;
namespace fs = std::filesystem;

namespace {
struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("sphs_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};
}  // namespace

TEST_CASE("float formatting is fixed-width 17 significant digits") {
    CHECK(fmt_float(1.0) == "1.0000000000000000e+00");
    CHECK(fmt_float(-0.5) == "-5.0000000000000000e-01");
    CHECK(fmt_float(1.0 / 3.0) == "3.3333333333333331e-01");
}

TEST_CASE("fnv1a64 matches the reference vectors") {
    CHECK(fnv1a64("") == 0xCBF29CE484222325ull);
    CHECK(fnv1a64("a") == 0xAF63DC4C8601EC8Cull);
    CHECK(hex64(0xCBF29CE484222325ull) == "cbf29ce484222325");
}

TEST_CASE("model json roundtrip with nested and flat matrices") {
    nlohmann::json j;
    j["n"] = 2;
    j["a"] = 0.0;
    j["b"] = 1.0;
    j["P0"] = {{0.0, 0.0}, {0.0, 0.0}};
    j["P1"] = {0.0, 1.0, 1.0, 0.0};  // flat row-major
    j["hamiltonian"] = {{"type", "constant"}, {"data", {{1.0, 0.0}, {0.0, 4.0}}}};
    const double s = 1.0 / std::sqrt(2.0);
    j["WB1"] = {-s, 0.0, 0.0, s};
    j["WB2"] = {s, s, s, s};
    j["WC"] = {0.0, -s, s, 0.0};
    const PhsModel m = parse_model_json(j);
    const StringModel sm = build_string_model({1.0, 4.0, 0.0, 1.0});
    CHECK((m.P1 - sm.model.P1).norm() == 0.0);
    CHECK((m.WB1 - sm.model.WB1).norm() <= 1e-15);
    CHECK(validate_model(m).all_pass());

    j["P1"] = {0.0, 1.0, 1.0};  // not divisible by columns
    CHECK_THROWS_AS(parse_model_json(j), ConfigError);
}

TEST_CASE("noise json: power law, explicit values, scale rules, rejects unknowns") {
    nlohmann::json j;
    j["I"] = 4;
    j["q"] = {{"type", "power"}, {"q0", 0.1}, {"r", 4.0}};
    j["basis"] = "sine";
    j["channel"] = 0;
    QWienerSpec spec = parse_noise_json(j);
    CHECK(spec.channels() == 4);
    CHECK(spec.q()[0] == doctest::Approx(0.1));
    CHECK(spec.q()[3] == doctest::Approx(0.1 / 256.0));

    j["scale"] = {{"type", "h_entry"}, {"row", 0}, {"col", 0}};
    spec = parse_noise_json(j);
    CHECK(spec.scaled());

    j["basis"] = "modal-flat";
    j["coeff"] = 0.05;
    spec = parse_noise_json(j);
    CHECK(spec.kind() == QWienerSpec::Kind::ModalFlat);

    j["basis"] = "unknown";
    CHECK_THROWS_AS(parse_noise_json(j), ConfigError);
    j["basis"] = "sine";
    j["q"] = {{"type", "power"}, {"q0", 0.1}, {"r", 0.5}};  // not trace class
    CHECK_THROWS_AS(parse_noise_json(j), ConfigError);
}

TEST_CASE("run config: mandatory seed, K <= N/4, x0 conjugate consistency") {
    const auto configs = string_acceptance_configs();
    nlohmann::json j = configs[0].second;
    RunConfig rc = parse_config(j, ".");
    CHECK(rc.is_string);
    CHECK(rc.sim.scheme == Scheme::ExactGaussian);
    CHECK(rc.has_lift);

    nlohmann::json no_seed = j;
    no_seed["sim"].erase("seed");
    CHECK_THROWS_AS(parse_config(no_seed, "."), ConfigError);

    nlohmann::json bad_k = j;
    bad_k["sim"]["K"] = 200;
    CHECK_THROWS_AS(parse_config(bad_k, "."), ConfigError);

    const StringFixture& f = default_string();
    const CVec x0 = parse_x0(j["x0"], f.basis);
    for (int k = 0; k < f.basis.size(); ++k)
        if (f.basis.lambda(k).imag() < -1e-12)
            CHECK(x0[k] == std::conj(x0[k - 1]));
}

TEST_CASE("csv writer: hash comment, header, fixed-format floats") {
    TempDir tmp;
    fs::create_directories(tmp.path);
    const fs::path file = tmp.path / "out.csv";
    {
        CsvWriter csv(file, "deadbeef00000000");
        csv.header({"t", "value"});
        csv.begin_row();
        csv.field_float(0.5);
        csv.field_int(7);
        csv.end_row();
    }
    const std::string bytes = read_file(file);
    CHECK(bytes ==
          "# config_hash=deadbeef00000000\nt,value\n5.0000000000000000e-01,7\n");
}

TEST_CASE("run directories are never reused") {
    TempDir tmp;
    const fs::path dir = tmp.path / "run1";
    prepare_run_dir(dir.string());
    CHECK(fs::exists(dir));
    prepare_run_dir(dir.string());  // still empty: fine
    write_file(dir / "artifact.txt", "x");
    CHECK_THROWS_AS(prepare_run_dir(dir.string()), ConfigError);
}

TEST_CASE("manifest carries command, hash, seed, and outputs") {
    TempDir tmp;
    fs::create_directories(tmp.path);
    write_manifest(tmp.path, "simulate", "0123456789abcdef", 42, 4,
                   {"trajectory.csv"}, {{"udot", "analytic"}});
    const nlohmann::json m = nlohmann::json::parse(read_file(tmp.path / "manifest.json"));
    CHECK(m.at("command") == "simulate");
    CHECK(m.at("config_hash") == "0123456789abcdef");
    CHECK(m.at("seed") == 42);
    CHECK(m.at("outputs")[0] == "trajectory.csv");
    CHECK(m.at("udot") == "analytic");
    CHECK(!m.contains("workers"));  // scheduling must not leak into artifacts
}

namespace {
int run_cli(const std::string& args) {
    const std::string cmd =
        std::string("\"") + SPHS_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST_CASE("cli validate: string benchmark exits 0 with an all-pass report") {
    TempDir tmp;
    fs::create_directories(tmp.path);
    nlohmann::json cfg = string_acceptance_configs()[0].second;
    write_file(tmp.path / "cfg.json", config_to_bytes(cfg));
    const fs::path out = tmp.path / "out";
    CHECK(run_cli("validate --config \"" + (tmp.path / "cfg.json").string() +
                  "\" --out \"" + out.string() + "\"") == 0);
    const nlohmann::json rep = nlohmann::json::parse(read_file(out / "validate.json"));
    CHECK(rep.at("all_pass") == true);
    CHECK(rep.at("generation").at("psd") == true);
    CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("cli validate: symmetric P0 exits 1; missing config exits 3") {
    TempDir tmp;
    fs::create_directories(tmp.path);
    nlohmann::json cfg = string_acceptance_configs()[0].second;
    const double s = 1.0 / std::sqrt(2.0);
    cfg["model"] = {{"type", "inline"},
                    {"n", 2},
                    {"a", 0.0},
                    {"b", 1.0},
                    {"P0", {{0.0, 1.0}, {1.0, 0.0}}},  // symmetric: not skew
                    {"P1", {{0.0, 1.0}, {1.0, 0.0}}},
                    {"hamiltonian",
                     {{"type", "constant"}, {"data", {{1.0, 0.0}, {0.0, 4.0}}}}},
                    {"WB1", {{-s, 0.0, 0.0, s}}},
                    {"WB2", {{s, s, s, s}}},
                    {"WC", {{0.0, -s, s, 0.0}}}};
    write_file(tmp.path / "bad.json", config_to_bytes(cfg));
    CHECK(run_cli("validate --config \"" + (tmp.path / "bad.json").string() +
                  "\" --out \"" + (tmp.path / "out1").string() + "\"") == 1);
    CHECK(run_cli("validate --config \"" + (tmp.path / "missing.json").string() +
                  "\" --out \"" + (tmp.path / "out2").string() + "\"") == 3);
}

TEST_CASE("cli simulate: matched impedance is a numerical failure (exit 2)") {
    TempDir tmp;
    fs::create_directories(tmp.path);
    nlohmann::json cfg = string_acceptance_configs()[0].second;
    cfg["model"]["T"] = 1.0;  // sqrt(T rho) = 1
    cfg["sim"]["paths"] = 2;
    write_file(tmp.path / "cfg.json", config_to_bytes(cfg));
    CHECK(run_cli("simulate --config \"" + (tmp.path / "cfg.json").string() +
                  "\" --out \"" + (tmp.path / "out").string() + "\"") == 2);
}

TEST_CASE("cli spectrum and moments write the documented CSV layouts") {
    TempDir tmp;
    fs::create_directories(tmp.path);
    nlohmann::json cfg = string_acceptance_configs()[0].second;
    cfg["sim"]["N"] = 64;
    cfg["sim"]["K"] = 8;
    cfg["sim"]["paths"] = 2;
    write_file(tmp.path / "cfg.json", config_to_bytes(cfg));

    const fs::path sp = tmp.path / "spectrum";
    REQUIRE(run_cli("spectrum --config \"" + (tmp.path / "cfg.json").string() +
                    "\" --out \"" + sp.string() + "\"") == 0);
    const std::string spectrum = read_file(sp / "spectrum.csv");
    CHECK(spectrum.find("k,re_lambda,im_lambda,gap,biorthogonality_defect") !=
          std::string::npos);
    CHECK(spectrum.rfind("# config_hash=", 0) == 0);

    const fs::path mo = tmp.path / "moments";
    REQUIRE(run_cli("moments --config \"" + (tmp.path / "cfg.json").string() +
                    "\" --out \"" + mo.string() + "\"") == 0);
    const std::string moments = read_file(mo / "moments.csv");
    CHECK(moments.find("trace_P,energy_rate") != std::string::npos);
    CHECK(moments.find("re_m0") != std::string::npos);
    CHECK(moments.find("P00") != std::string::npos);
}

TEST_CASE("noise profiles can be loaded from a sidecar file") {
    TempDir tmp;
    fs::create_directories(tmp.path);
    nlohmann::json profiles = nlohmann::json::array();
    nlohmann::json one = nlohmann::json::array();
    const Grid1D grid(0.0, 1.0, 64);
    for (int comp = 0; comp < 2; ++comp) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < grid.nodes(); ++j) row.push_back(comp == 0 ? 1.0 : 0.0);
        one.push_back(row);
    }
    profiles.push_back(one);
    write_file(tmp.path / "profiles.json", profiles.dump());

    nlohmann::json cfg = string_acceptance_configs()[0].second;
    cfg["sim"]["N"] = 64;
    cfg["sim"]["K"] = 8;
    cfg["noise"] = {{"I", 1},
                    {"q", {{"type", "explicit"}, {"values", {0.5}}}},
                    {"basis", "grid"},
                    {"profiles_path", "profiles.json"},
                    {"tail_tol", 1.0}};
    write_file(tmp.path / "cfg.json", config_to_bytes(cfg));
    const RunConfig rc = load_config((tmp.path / "cfg.json").string());
    CHECK(rc.noise.kind() == QWienerSpec::Kind::Grid);
    CHECK(rc.noise.raw_profiles().size() == 1);
    CHECK(rc.noise.raw_profiles()[0](0, 10) == 1.0);
}

TEST_CASE("ensemble results are byte-identical across serial and parallel runners") {
    const StringFixture& f = default_string();
    QWienerSpec spec = QWienerSpec::channel(QWienerSpec::power_law(8, 0.1, 4.0),
                                            QWienerSpec::Family::Sine, 0);
    const ResolvedNoise noise = resolve_noise(spec, f.sm.model, f.basis);
    const TimeGrid tg{1e-3, 200};
    MildSimulator sim(f.sm.model, f.basis, noise, tg, Scheme::ExactGaussian);
    const CVec x0 = CVec::Zero(f.basis.size());
    const int paths = 64;

    auto run_with_runner = [&](bool parallel, int workers) {
        std::vector<CVec> ends(paths);
        auto body = [&](int64_t p) {
            sim.run_with(5, uint64_t(p), x0, [&](int s, double, const CVec& x) {
                if (s == tg.steps) ends[size_t(p)] = x;
            });
        };
        if (parallel)
            parallel_paths(paths, workers, body);
        else
            serial_paths(paths, body);
        return ends;
    };

    const auto serial = run_with_runner(false, 0);
    const auto par1 = run_with_runner(true, 1);
    const auto par4 = run_with_runner(true, 4);
    for (int p = 0; p < paths; ++p) {
        CHECK(std::memcmp(serial[p].data(), par1[p].data(),
                          sizeof(cplx) * serial[p].size()) == 0);
        CHECK(std::memcmp(serial[p].data(), par4[p].data(),
                          sizeof(cplx) * serial[p].size()) == 0);
    }
}
