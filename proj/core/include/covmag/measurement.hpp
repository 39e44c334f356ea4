#pragma once

// Shot-level Monte Carlo of the three experiment classes (driven, correlated
// T2, correlated T1), the thresholded-readout noise model, Pearson
// estimation with background subtraction, and the sensitivity projection.

#include <cstdint>
#include <span>
#include <vector>

#include "covmag/bloch.hpp"
#include "covmag/constants.hpp"
#include "covmag/dd.hpp"
#include "covmag/noise.hpp"
#include "covmag/stream.hpp"

namespace covmag {

// State-assignment error probabilities of one sensor's readout.
struct ReadoutModel {
  double eps0 = 0.0;  // P(assign 1 | true 0)
  double eps1 = 0.0;  // P(assign 0 | true 1)

  void validate() const;
  bool ideal() const { return eps0 == 0.0 && eps1 == 0.0; }
};

// sigma_R = 2 sqrt(q(1-q)) / (1 - eps0 - eps1), q = (1 + eps0 - eps1)/2.
// Equals 1 for projective readout and satisfies r_max = 1/(sR1 sR2) for
// perfectly correlated equal-mixture inputs.
double readout_noise_sigma(const ReadoutModel& m);

// Converts photon-count statistics (Poisson means for the two spin states and
// an assignment threshold "counts > threshold -> 1") into (eps0, eps1).
ReadoutModel poisson_readout_model(double mean_counts0, double mean_counts1,
                                   int threshold);

enum class PairingConfig { correlation, anticorrelation };

struct ShotRecord {
  std::size_t shots = 0;
  std::vector<std::uint8_t> s1, s2;
  PairingConfig config = PairingConfig::correlation;
};

struct PearsonResult {
  double r = 0.0;
  double stderr_ = 0.0;
  std::size_t shots = 0;
};

// r = (<S1 S2> - <S1><S2>) / (sigma_S1 sigma_S2) with population standard
// deviations; stderr = (1 - r^2)/sqrt(M) (floored at 1/M^{3/2} so it stays
// positive for perfectly correlated records).
PearsonResult pearson_estimate(const ShotRecord& shots);

struct SubtractedCorrelation {
  double signal = 0.0;
  double signal_stderr = 0.0;
  double background = 0.0;
  double background_stderr = 0.0;
};

SubtractedCorrelation background_subtract(const PearsonResult& r_corr,
                                          const PearsonResult& r_anti);

// Direct spin driving, alternating the polar angle between theta and
// theta + pi in successive iterations. The anticorrelation configuration
// offsets sensor 2's target by pi.
ShotRecord simulate_driven_experiment(double theta, std::size_t shots,
                                      const ReadoutModel& m1,
                                      const ReadoutModel& m2,
                                      PairingConfig config, StreamKey key,
                                      unsigned n_threads = 1);

// Sine-magnetometry shots: per repetition draw one phase per tone, accumulate
// phi_Ci through each sensor's sequence, and sample
// P(S_i = 1) = [1 - exp(-chi_i) sin(phi_Ci)]/2.
ShotRecord simulate_t2_experiment(std::span<const ToneSpec> tones,
                                  const SenseSequence& seq1,
                                  const SenseSequence& seq2, double chi1,
                                  double chi2, const ReadoutModel& m1,
                                  const ReadoutModel& m2, std::size_t shots,
                                  StreamKey key, unsigned n_threads = 1,
                                  double gamma_e = constants::gyromag);

// Co-relaxation shots: fresh shared-noise realization per repetition, Bloch
// evolution to sense_time, projective sampling of each sensor.
ShotRecord simulate_t1_experiment(const SensorDrive& drive1,
                                  const SensorDrive& drive2,
                                  const NoiseSpec& noise_spec,
                                  double sense_time, std::size_t shots,
                                  const ReadoutModel& m1,
                                  const ReadoutModel& m2, bool pi_pulse1,
                                  bool pi_pulse2, StreamKey key,
                                  unsigned n_threads = 1);

struct SensitivityTiming {
  double t_init = 0.0;   // s
  double t_sense = 0.0;  // s
  double t_read = 0.0;   // s
};

struct SensitivityResult {
  std::size_t repetitions = 0;  // M = floor(T_total / cycle)
  double sigma_b_min = 0.0;     // T
  double sensitivity = 0.0;     // T Hz^{-1/4}
};

// Field amplitude at which the small-signal model correlation
// r = C1 C2 (gamma B t w)^2 / (2 sR1 sR2) meets the statistical floor
// 1/sqrt(M).
SensitivityResult sensitivity_minimum_field(
    const SensitivityTiming& timing, double sigma_r1, double sigma_r2,
    double c1, double c2, double filter_w, double t_total,
    double gamma_e = constants::gyromag);

}  // namespace covmag
