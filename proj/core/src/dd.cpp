#include "covmag/dd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace covmag {

namespace {

constexpr double pi = std::numbers::pi;

double bessel_j0(double x) { return std::cyl_bessel_j(0.0, std::abs(x)); }

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

}  // namespace

void SenseSequence::validate() const {
  if (n_pulses < 1 || !(tau > 0.0)) {
    throw std::invalid_argument("sense sequence: need n_pulses >= 1, tau > 0");
  }
}

void ToneSpec::validate() const {
  if (!(f > 0.0) || b1 < 0.0 || b2 < 0.0) {
    throw std::invalid_argument("tone: need f > 0 and amplitudes >= 0");
  }
}

double DecoherenceInputs::envelope() const {
  return std::exp(-(chi1 + chi2)) / (sigma_r1 * sigma_r2);
}

void DecoherenceInputs::validate() const {
  if (chi1 < 0.0 || chi2 < 0.0) {
    throw std::invalid_argument("decoherence: chi exponents must be >= 0");
  }
  if (!(sigma_r1 >= 1.0) || !(sigma_r2 >= 1.0)) {
    throw std::invalid_argument("decoherence: readout noise must be >= 1");
  }
}

FilterWeight filter_weight(double f, const SenseSequence& seq) {
  seq.validate();
  if (!(f > 0.0)) throw std::invalid_argument("filter_weight: f must be > 0");

  const double n = seq.n_pulses;
  const double x = f * seq.tau;
  const double phi = pi * n * x;

  // sec(pi x) poles sit at x0 = k + 1/2. Near one, the pole is removable only
  // when sin(phi) vanishes there too, which needs even N.
  const double k = std::round(x - 0.5);
  const double eps = x - (k + 0.5);
  if (std::abs(eps) < 1e-4) {
    if (seq.n_pulses % 2 != 0) {
      std::ostringstream err;
      err << "filter_weight: non-removable divergence for odd N = "
          << seq.n_pulses << " at f*tau = " << k + 0.5;
      throw std::invalid_argument(err.str());
    }
    // Exact rewrite around the pole: with cN = cos(pi N x0) = (-1)^{N/2} and
    // sk = (-1)^k,
    //   w = cN [sin(pi N eps) + sk * N * sinc(pi N eps)/sinc(pi eps)] / phi.
    const double cn = (seq.n_pulses / 2) % 2 == 0 ? 1.0 : -1.0;
    const double sk = std::fmod(k, 2.0) == 0.0 ? 1.0 : -1.0;
    const double ratio = n * sinc(pi * n * eps) / sinc(pi * eps);
    const double w = cn * (std::sin(pi * n * eps) + sk * ratio) / phi;
    return {w, phi};
  }

  const double w = sinc(phi) * (1.0 - 1.0 / std::cos(pi * x));
  return {w, phi};
}

double accumulated_phase(const ToneSpec& tone, const SenseSequence& seq,
                         int sensor, double alpha, double gamma_e) {
  tone.validate();
  if (sensor != 1 && sensor != 2) {
    throw std::invalid_argument("accumulated_phase: sensor must be 1 or 2");
  }
  const FilterWeight fw = filter_weight(tone.f, seq);
  const double psi = fw.phi + constants::two_pi * tone.f * seq.delay;
  return gamma_e * tone.amplitude(sensor) * seq.total_time() * fw.w *
         std::cos(alpha + psi);
}

ToneGeometry tone_geometry(const ToneSpec& tone, const SenseSequence& seq1,
                           const SenseSequence& seq2, double gamma_e) {
  tone.validate();
  const FilterWeight f1 = filter_weight(tone.f, seq1);
  const FilterWeight f2 = filter_weight(tone.f, seq2);

  ToneGeometry g;
  g.eta1 = gamma_e * tone.b1 * seq1.total_time() * f1.w;
  g.eta2 = gamma_e * tone.b2 * seq2.total_time() * f2.w;
  g.psi1 = f1.phi + constants::two_pi * tone.f * seq1.delay;
  g.psi2 = f2.phi + constants::two_pi * tone.f * seq2.delay;

  const double dpsi = g.psi1 - g.psi2;
  const double cross = 2.0 * g.eta1 * g.eta2 * std::cos(dpsi);
  const double base = g.eta1 * g.eta1 + g.eta2 * g.eta2;
  g.xi_plus = std::sqrt(std::max(0.0, base + cross));
  g.xi_minus = std::sqrt(std::max(0.0, base - cross));
  g.beta_plus = std::atan2(g.eta1 * std::sin(g.psi1) + g.eta2 * std::sin(g.psi2),
                           g.eta1 * std::cos(g.psi1) + g.eta2 * std::cos(g.psi2));
  g.beta_minus =
      std::atan2(g.eta1 * std::sin(g.psi1) - g.eta2 * std::sin(g.psi2),
                 g.eta1 * std::cos(g.psi1) - g.eta2 * std::cos(g.psi2));
  return g;
}

double correlation_lineshape(std::span<const ToneSpec> tones,
                             const SenseSequence& seq1,
                             const SenseSequence& seq2,
                             const DecoherenceInputs& dec, double scale,
                             double gamma_e) {
  dec.validate();
  if (tones.empty()) {
    throw std::invalid_argument("correlation_lineshape: no tones given");
  }

  if (tones.size() == 1) {
    const ToneGeometry g = tone_geometry(tones[0], seq1, seq2, gamma_e);
    return scale * dec.envelope() *
           0.5 * (bessel_j0(g.xi_minus) - bessel_j0(g.xi_plus));
  }

  // Mutually unlocked tones: average sin(phi_C1) sin(phi_C2) over each phase
  // with a tensor-product periodic rule. 64 nodes integrate the Bessel
  // harmonic content to machine accuracy for the phase amplitudes of
  // interest.
  constexpr std::size_t nodes = 64;
  std::vector<ToneGeometry> geo;
  geo.reserve(tones.size());
  for (const auto& tone : tones) {
    geo.push_back(tone_geometry(tone, seq1, seq2, gamma_e));
  }

  std::vector<std::size_t> grid(tones.size(), 0);
  double acc = 0.0;
  const double step = constants::two_pi / nodes;
  for (;;) {
    double phi1 = 0.0, phi2 = 0.0;
    for (std::size_t m = 0; m < geo.size(); ++m) {
      const double alpha = step * static_cast<double>(grid[m]);
      phi1 += geo[m].eta1 * std::cos(alpha + geo[m].psi1);
      phi2 += geo[m].eta2 * std::cos(alpha + geo[m].psi2);
    }
    acc += std::sin(phi1) * std::sin(phi2);

    std::size_t carry = 0;
    while (carry < grid.size() && ++grid[carry] == nodes) {
      grid[carry] = 0;
      ++carry;
    }
    if (carry == grid.size()) break;
  }
  const double count = std::pow(static_cast<double>(nodes),
                                static_cast<double>(tones.size()));
  return scale * dec.envelope() * acc / count;
}

TwoTimeSpectrum two_time_spectrum(const ToneSpec& tone,
                                  const SenseSequence& seq1,
                                  const SenseSequence& seq2,
                                  std::span<const double> delay_grid,
                                  const DecoherenceInputs& dec, double scale,
                                  double gamma_e) {
  TwoTimeSpectrum out;
  out.delay.assign(delay_grid.begin(), delay_grid.end());
  out.r.reserve(delay_grid.size());

  SenseSequence delayed = seq2;
  const ToneSpec single[1] = {tone};
  for (double dt_off : delay_grid) {
    delayed.delay = dt_off;
    out.r.push_back(
        correlation_lineshape(single, seq1, delayed, dec, scale, gamma_e));
  }

  const std::size_t n = delay_grid.size();
  if (n >= 2) {
    const double h = delay_grid[1] - delay_grid[0];
    bool uniform = h > 0.0;
    for (std::size_t j = 1; j + 1 < n && uniform; ++j) {
      uniform = std::abs(delay_grid[j + 1] - delay_grid[j] - h) <= 1e-9 * h;
    }
    if (uniform) {
      double mean = 0.0;
      for (double v : out.r) mean += v;
      mean /= static_cast<double>(n);
      out.freq.resize(n / 2 + 1);
      out.dft_real.resize(n / 2 + 1);
      for (std::size_t q = 0; q < out.freq.size(); ++q) {
        out.freq[q] = static_cast<double>(q) / (static_cast<double>(n) * h);
        double re = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          re += (out.r[j] - mean) *
                std::cos(constants::two_pi * static_cast<double>(q * j) /
                         static_cast<double>(n));
        }
        out.dft_real[q] = re;
      }
      out.dft_valid = true;
    }
  }
  return out;
}

PsdResult psd_from_correlation(double r, const DecoherenceInputs& dec,
                               double c1, double c2, double t, double tau,
                               double gamma_e) {
  dec.validate();
  if (!(c1 > 0.0 && c1 <= 1.0) || !(c2 > 0.0 && c2 <= 1.0)) {
    throw std::invalid_argument("psd: coherences must lie in (0, 1]");
  }
  if (!(t > 0.0) || !(tau > 0.0)) {
    throw std::invalid_argument("psd: t and tau must be > 0");
  }
  PsdResult out;
  out.s12_rad = pi * pi / (8.0 * t) *
                std::asinh(r * dec.sigma_r1 * dec.sigma_r2 / (c1 * c2));
  out.s12_field = out.s12_rad / (gamma_e * gamma_e);
  out.f_probe = 1.0 / (2.0 * tau);
  return out;
}

double correlation_from_phase_moments(double phi11, double phi22, double phi12,
                                      const DecoherenceInputs& dec) {
  dec.validate();
  const double minus = phi11 + phi22 - 2.0 * phi12;
  const double plus = phi11 + phi22 + 2.0 * phi12;
  return 0.5 * dec.envelope() *
         (std::exp(-0.5 * minus) - std::exp(-0.5 * plus));
}

double calibration_contrast(double v, double kappa, const SenseSequence& seq,
                            double f, double gamma_e) {
  seq.validate();
  if (v < 0.0 || !(f > 0.0)) {
    throw std::invalid_argument("calibration: need V >= 0 and f > 0");
  }
  const double arg = gamma_e * kappa * v * seq.n_pulses / (pi * f);
  return 0.5 * (1.0 + bessel_j0(arg));
}

}  // namespace covmag
