#pragma once

// Analytic machinery for correlated T2 spectroscopy with CPMG/XY8 sequences:
// filter weights, accumulated phases for slowly phase-diffusing AC tones,
// Bessel-function correlation lineshapes (including asymmetric sequences and
// inter-sequence delays), inversion of correlation to the cross power
// spectral density, and the single-sensor contrast calibration model.

#include <cstddef>
#include <span>
#include <vector>

#include "covmag/constants.hpp"

namespace covmag {

struct SenseSequence {
  int n_pulses = 0;   // total pi-pulse count N (XY8-k has N = 8k)
  double tau = 0.0;   // interpulse spacing, s
  double delay = 0.0; // offset of the sequence start, s

  double total_time() const { return n_pulses * tau; }
  bool xy8_compatible() const { return n_pulses % 8 == 0; }
  void validate() const;
};

// One AC test tone with per-sensor amplitudes. phase_bandwidth is carried for
// bookkeeping only; the slow-phase approximation treats the phase as uniform
// and constant within a repetition.
struct ToneSpec {
  double f = 0.0;   // Hz
  double b1 = 0.0;  // T at sensor 1
  double b2 = 0.0;  // T at sensor 2
  double phase_bandwidth = 0.0;  // Hz, informational

  double amplitude(int sensor) const { return sensor == 1 ? b1 : b2; }
  void validate() const;
};

struct DecoherenceInputs {
  double chi1 = 0.0;     // uncorrelated decoherence exponents at t_i
  double chi2 = 0.0;
  double sigma_r1 = 1.0; // readout noise, >= 1
  double sigma_r2 = 1.0;

  double envelope() const;  // exp(-(chi1+chi2)) / (sR1 sR2)
  void validate() const;
};

struct FilterWeight {
  double w = 0.0;    // dimensionless weight
  double phi = 0.0;  // pi f N tau, rad
};

// w = (sin phi / phi) [1 - sec(phi/N)]. Removable singularities at
// f tau = k + 1/2 (even N) are evaluated through an exact reformulation;
// odd N at those points diverges and is rejected.
FilterWeight filter_weight(double f, const SenseSequence& seq);

// phi_C = gamma B_sensor N tau w cos(alpha + phi + 2 pi f delay).
double accumulated_phase(const ToneSpec& tone, const SenseSequence& seq,
                         int sensor, double alpha,
                         double gamma_e = constants::gyromag);

// Per-sensor phase-accumulation geometry of one tone, plus the +/- envelope
// variables (beta_pm are diagnostics; the phase-averaged lineshape does not
// depend on them).
struct ToneGeometry {
  double eta1 = 0.0, eta2 = 0.0;  // gamma B_i t_i w_i
  double psi1 = 0.0, psi2 = 0.0;  // filter phase + delay phase per sensor
  double xi_plus = 0.0, xi_minus = 0.0;
  double beta_plus = 0.0, beta_minus = 0.0;
};
ToneGeometry tone_geometry(const ToneSpec& tone, const SenseSequence& seq1,
                           const SenseSequence& seq2,
                           double gamma_e = constants::gyromag);

// Phase-averaged Pearson correlation. A single tone uses the closed form
//   r = scale * envelope * [J0(xi_minus) - J0(xi_plus)] / 2;
// several mutually unlocked tones are averaged by tensor-product quadrature
// over each phase (>= 64 periodic nodes per tone).
double correlation_lineshape(std::span<const ToneSpec> tones,
                             const SenseSequence& seq1,
                             const SenseSequence& seq2,
                             const DecoherenceInputs& dec, double scale,
                             double gamma_e = constants::gyromag);

struct TwoTimeSpectrum {
  std::vector<double> delay;  // s
  std::vector<double> r;
  std::vector<double> freq;      // Hz, conjugate to the delay grid
  std::vector<double> dft_real;  // real part of DFT of (r - mean)
  bool dft_valid = false;        // false when the delay grid is non-uniform
};

// Sweeps the delay of sensor 2's sequence.
TwoTimeSpectrum two_time_spectrum(const ToneSpec& tone,
                                  const SenseSequence& seq1,
                                  const SenseSequence& seq2,
                                  std::span<const double> delay_grid,
                                  const DecoherenceInputs& dec, double scale,
                                  double gamma_e = constants::gyromag);

struct PsdResult {
  double s12_rad = 0.0;    // rad^2/s
  double s12_field = 0.0;  // T^2/Hz
  double f_probe = 0.0;    // Hz
};

// S12(pi/tau) = (pi^2 / 8t) asinh(r sR1 sR2 / (C1 C2)); the field-unit value
// divides out gamma^2.
PsdResult psd_from_correlation(double r, const DecoherenceInputs& dec,
                               double c1, double c2, double t, double tau,
                               double gamma_e = constants::gyromag);

// Gaussian/weak-noise form of the correlation given second moments of the
// accumulated phases (independent algebraic route to the lineshape; also the
// forward map inverted by psd_from_correlation).
double correlation_from_phase_moments(double phi11, double phi22, double phi12,
                                      const DecoherenceInputs& dec);

// Spin contrast of the calibration measurement:
// (1/2)[1 + J0(gamma kappa V N / (pi f))].
double calibration_contrast(double v, double kappa, const SenseSequence& seq,
                            double f, double gamma_e = constants::gyromag);

}  // namespace covmag
