#include "sphs/string_example.hpp"

#include <json.hpp>
#include <cmath>

namespace sphs {

using nlohmann::json;

StringModel build_string_model(const StringParams& p) {
    if (p.rho <= 0.0 || p.T_modulus <= 0.0)
        throw ConfigError("string: rho and T must be positive");
    if (!(p.b > p.a)) throw ConfigError("string: a < b required");

    StringModel out;
    out.params = p;
    out.impedance_matched = std::abs(std::sqrt(p.T_modulus * p.rho) - 1.0) < 1e-12;

    PhsModel& m = out.model;
    m.n = 2;
    m.a = p.a;
    m.b = p.b;
    m.P1.resize(2, 2);
    m.P1 << 0, 1, 1, 0;
    m.P0 = Mat::Zero(2, 2);
    Mat H(2, 2);
    H << 1.0 / p.rho, 0, 0, p.T_modulus;
    m.hamiltonian = HamiltonianDensity::constant(H);

    const double s = 1.0 / std::sqrt(2.0);
    m.WB1.resize(1, 4);
    m.WB1 << -s, 0, 0, s;
    m.WB2.resize(1, 4);
    m.WB2 << s, s, s, s;
    m.WC.resize(1, 4);
    m.WC << 0, -s, s, 0;

    // corrected lift: g affine with g(a) = 1/T(a), g(b) = 0
    const double ga = 1.0 / p.T_modulus;
    const double slope = -ga / (p.b - p.a);
    out.lift.alpha = Mat::Zero(2, 1);
    out.lift.beta = Mat::Zero(2, 1);
    out.lift.alpha(1, 0) = ga - slope * p.a;
    out.lift.beta(1, 0) = slope;

    out.default_noise =
        QWienerSpec::channel(QWienerSpec::power_law(32, 0.1, 4.0),
                             QWienerSpec::Family::Sine, /*component=*/0);
    return out;
}

namespace {

json string_model_block(double rho, double T) {
    return json{{"type", "string"}, {"rho", rho}, {"T", T}, {"a", 0.0}, {"b", 1.0}};
}

json default_noise_block() {
    return json{{"I", 32},
                {"q", {{"type", "power"}, {"q0", 0.1}, {"r", 4.0}}},
                {"basis", "sine"},
                {"channel", 0},
                {"tail_tol", 1e-6}};
}

}  // namespace

std::vector<std::pair<std::string, json>> string_acceptance_configs() {
    std::vector<std::pair<std::string, json>> configs;

    {
        json c;
        c["model"] = string_model_block(1.0, 4.0);
        c["noise"] = default_noise_block();
        c["sim"] = {{"K", 32},     {"N", 512},          {"dt", 1e-3},
                    {"t_final", 1.0}, {"paths", 10000}, {"seed", 20260808},
                    {"scheme", "exact-gaussian"}, {"output_points", 11}};
        c["input"] = {{"type", "zero"}};
        c["x0"] = {{"type", "modal-decay"}, {"scale", 1.0}, {"rate", 2.0}};
        configs.emplace_back("damped-string-mc", c);
    }
    {
        json c;
        c["model"] = string_model_block(1.0, 4.0);
        c["noise"] = default_noise_block();
        c["sim"] = {{"K", 32},     {"N", 512},          {"dt", 1e-3},
                    {"t_final", 1.0}, {"paths", 10000}, {"seed", 20260809},
                    {"scheme", "exact-gaussian"}, {"output_points", 11}};
        c["input"] = {{"type", "zero"}};
        c["x0"] = {{"type", "modal-decay"}, {"scale", 1.0}, {"rate", 2.0}};
        c["moments"] = {{"compare_mc", true}};
        configs.emplace_back("moments-vs-mc", c);
    }
    {
        json c;
        c["model"] = string_model_block(1.0, 4.0);
        c["noise"] = default_noise_block();
        c["sim"] = {{"K", 24},    {"N", 512},         {"dt", 1e-3},
                    {"t_final", 1.0}, {"paths", 1000}, {"seed", 20260810},
                    {"scheme", "increment"}, {"output_points", 11}};
        c["input"] = {{"type", "sine"}, {"amp", {0.5}}, {"omega", {2.0}}, {"phase", {0.0}}};
        c["x0"] = {{"type", "modal-decay"}, {"scale", 0.5}, {"rate", 2.0}};
        c["yosida"] = {{"lambdas", {10.0, 100.0, 1000.0, 10000.0}}};
        configs.emplace_back("yosida-ladder", c);
    }
    {
        json c;
        c["model"] = string_model_block(1.0, 4.0);
        c["noise"] = {{"I", 8},
                      {"q", {{"type", "power"}, {"q0", 0.1}, {"r", 2.0}}},
                      {"basis", "modal"},
                      {"tail_tol", 0.02}};
        c["sim"] = {{"K", 32},   {"N", 512},      {"dt", 1e-3},
                    {"t_final", 1.0}, {"paths", 0}, {"seed", 20260811},
                    {"scheme", "increment"}, {"output_points", 11}};
        c["input"] = {{"type", "zero"}};
        c["x0"] = {{"type", "zero"}};
        c["admissibility"] = {{"t", 1.0}, {"K_partial", {64, 128, 192, 256, 320}}};
        configs.emplace_back("admissibility-pass", c);
    }
    {
        json c;
        c["model"] = string_model_block(1.0, 4.0);
        c["noise"] = {{"I", 8},
                      {"q", {{"type", "explicit"},
                             {"values", {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1}}}},
                      {"basis", "modal-flat"},
                      {"coeff", 0.05},
                      {"tail_tol", 0.2}};
        c["sim"] = {{"K", 32},   {"N", 512},      {"dt", 1e-3},
                    {"t_final", 1.0}, {"paths", 0}, {"seed", 20260812},
                    {"scheme", "increment"}, {"output_points", 11}};
        c["input"] = {{"type", "zero"}};
        c["x0"] = {{"type", "zero"}};
        c["admissibility"] = {{"t", 1.0}, {"K_partial", {64, 128, 192, 256, 320}}};
        configs.emplace_back("admissibility-fail", c);
    }
    return configs;
}

std::vector<std::pair<std::string, json>> string_noise_variant_configs() {
    std::vector<std::pair<std::string, json>> configs;
    json base;
    base["model"] = string_model_block(1.0, 4.0);
    base["sim"] = {{"K", 16},    {"N", 256},        {"dt", 1e-3},
                   {"t_final", 1.0}, {"paths", 2000}, {"seed", 20260813},
                   {"scheme", "exact-gaussian"}, {"output_points", 11}};
    base["input"] = {{"type", "zero"}};
    base["x0"] = {{"type", "zero"}};
    {
        json c = base;
        c["noise"] = default_noise_block();
        configs.emplace_back("noise-spde-form", c);
    }
    {
        json c = base;
        c["noise"] = default_noise_block();
        c["noise"]["scale"] = {{"type", "h_entry"}, {"row", 0}, {"col", 0}};  // 1/rho
        configs.emplace_back("noise-wave-form", c);
    }
    return configs;
}

std::string config_to_bytes(const json& config) {
    return config.dump(2) + "\n";
}

}  // namespace sphs
