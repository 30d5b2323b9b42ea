#pragma once

#include <json.hpp>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sphs/model.hpp"
#include "sphs/noise.hpp"
#include "sphs/solver.hpp"
#include "sphs/string_example.hpp"

namespace sphs {

struct SimConfig {
    int K = 32;
    int N = 512;
    double dt = 1e-3;
    double t_final = 1.0;
    int64_t paths = 1;
    uint64_t seed = 0;
    Scheme scheme = Scheme::ExactGaussian;
    int output_points = 11;

    int steps() const { return int(std::llround(t_final / dt)); }
    TimeGrid time_grid() const { return TimeGrid{dt, steps()}; }
};

struct RunConfig {
    nlohmann::json raw;
    bool is_string = false;
    StringParams string_params;
    PhsModel model;
    BoundaryLift lift;
    bool has_lift = false;
    QWienerSpec noise = QWienerSpec::channel(Vec::Ones(1), QWienerSpec::Family::Sine, 0);
    SimConfig sim;
    InputSignal input = InputSignal::zero(1);
    nlohmann::json x0_spec;
};

// Model files per the external-interface schema:
//   {n, a, b, P0, P1, hamiltonian:{type:"constant"|"grid", ...}, WB1, WB2, WC}
// Matrices may be flat row-major arrays or arrays of rows.
PhsModel parse_model_json(const nlohmann::json& j);
QWienerSpec parse_noise_json(const nlohmann::json& j);
InputSignal parse_input_json(const nlohmann::json& j, int m);
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::string& path);

// Initial modal state from the config block (needs the basis for sizes and
// the conjugate-pair structure).
CVec parse_x0(const nlohmann::json& j, const ModalBasis& basis);

uint64_t fnv1a64(const std::string& bytes);
std::string hex64(uint64_t value);

// Fixed-format floats: 17 significant digits in scientific notation, so CSV
// artifacts are byte-stable golden files.
std::string fmt_float(double value);

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::string& config_hash);
    void header(const std::vector<std::string>& names);
    void begin_row();
    void field(const std::string& text);
    void field_float(double value);
    void field_int(int64_t value);
    void end_row();

  private:
    std::ofstream out_;
    bool first_in_row_ = true;
};

// Refuses to reuse a non-empty directory (one directory per run).
std::filesystem::path prepare_run_dir(const std::string& out_dir);

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const std::string& config_hash, uint64_t seed, int workers,
                    const std::vector<std::string>& outputs,
                    const nlohmann::json& extra = nlohmann::json::object());

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace sphs
