#pragma once

// Strict key = value configuration for the covmag CLI. Sections map to
// subcommand parameter blocks; units are encoded in key names (_s, _Hz, _T,
// _rad, _per_s). Unknown keys are rejected so unit mistakes fail loudly.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace covmag::cli {

struct NoiseBlock {
  double tau_c_s = 0.0;
  double duration_s = 0.0;
  double dt_s = 0.0;  // 0 -> tau_c / 20
  std::uint64_t index = 0;
};

struct DriveBlock {
  double b_eff_T = 0.0;
  double phase_rad = 0.0;
  double delta_Hz = 0.0;
};

struct SeqBlock {
  int n_pulses = 0;
  double tau_s = 0.0;
  double delay_s = 0.0;
};

struct ToneBlock {
  double f_Hz = 0.0;
  double b1_T = 0.0;
  double b2_T = 0.0;
  double phase_bandwidth_Hz = 0.0;
};

struct ReadoutBlock {
  double eps0 = 0.0;
  double eps1 = 0.0;
};

struct T1Block {
  double t_min_s = 0.0;
  double t_max_s = 0.0;
  int n_points = 0;
  std::uint64_t shots = 0;
  bool pi_pulse1 = false;
  bool pi_pulse2 = false;
};

struct QmeBlock {
  double gamma1_per_s = 0.0;
  double gamma2_per_s = 0.0;
  std::vector<double> delta1_Hz{0.0};
  double delta2_Hz = 0.0;
  double gd11_per_s = 0.0;
  double gd22_per_s = 0.0;
  double gd12_per_s = 0.0;
  double r0 = 1.0;
  double sigmaR1 = 1.0;
  double sigmaR2 = 1.0;
  double t_min_s = 0.0;
  double t_max_s = 0.0;
  int n_points = 0;
};

struct T2Block {
  std::string sweep = "frequency";  // frequency | delay
  std::string vary = "both";        // both | seq2
  double f_min_Hz = 0.0;
  double f_max_Hz = 0.0;
  double dt_min_s = 0.0;
  double dt_max_s = 0.0;
  int n_points = 0;
  double chi1 = 0.0;
  double chi2 = 0.0;
  double sigmaR1 = 1.0;
  double sigmaR2 = 1.0;
  double scale = 1.0;
  std::uint64_t shots = 0;  // t2-sim only
  double b1_err_T = 0.0;
  double b2_err_T = 0.0;
  double sigmaR1_err = 0.0;
  double sigmaR2_err = 0.0;
};

struct DrivenBlock {
  double theta_min_rad = 0.0;
  double theta_max_rad = 0.0;
  int n_points = 0;
  std::uint64_t shots = 0;
  bool emit_shots = false;
};

struct SensitivityBlock {
  double t_init_s = 0.0;
  double t_sense_s = 0.0;
  double t_read_s = 0.0;
  double sigmaR1 = 1.0;
  double sigmaR2 = 1.0;
  double C1 = 1.0;
  double C2 = 1.0;
  double w = 0.63661977236758138;  // 2/pi
  double T_min_s = 0.0;
  double T_max_s = 0.0;
  int n_points = 0;
};

struct PsdBlock {
  double r = 0.0;
  double C1 = 1.0;
  double C2 = 1.0;
  double sigmaR1 = 1.0;
  double sigmaR2 = 1.0;
  double t_s = 0.0;
  double tau_s = 0.0;
};

struct FreeParamSpec {
  std::string name;
  double init = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct FitBlock {
  std::string model;
  std::vector<std::string> data;  // one CSV, or one per detuning dataset
  std::vector<double> delta1_list_Hz;
  std::map<std::string, double> fixed;
  std::vector<FreeParamSpec> free;
  std::map<std::string, double> known;  // correlated_t1 only
  std::size_t max_iterations = 2000;
};

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = auto
  double gamma_over_2pi_Hz_per_T = 28.025e9;

  std::optional<NoiseBlock> noise;
  std::optional<DriveBlock> drive1, drive2;
  std::optional<SeqBlock> seq1, seq2;
  std::vector<ToneBlock> tones;
  std::optional<ReadoutBlock> readout1, readout2;
  std::optional<T1Block> t1;
  std::optional<QmeBlock> qme;
  std::optional<T2Block> t2;
  std::optional<DrivenBlock> driven;
  std::optional<SensitivityBlock> sensitivity;
  std::optional<PsdBlock> psd;
  std::optional<FitBlock> fit;

  double gamma_e() const;  // rad/s/T
};

// Parses and validates; throws std::invalid_argument naming the offending
// key path.
RunConfig load_config(const std::filesystem::path& path);

// Serialization of the fully resolved config; load_config of this text
// reproduces the identical RunConfig.
std::string config_echo(const RunConfig& cfg);

RunConfig parse_config_text(const std::string& text);

}  // namespace covmag::cli
