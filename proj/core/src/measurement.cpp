#include "covmag/measurement.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "covmag/parallel.hpp"

namespace covmag {

namespace {

// One readout draw is consumed whether or not a flip happens, so record
// layouts never shift with the error rates.
std::uint8_t apply_readout(std::uint8_t s, const ReadoutModel& m,
                           RandomStream& rng) {
  const double u = rng.uniform();
  if (s == 1) return u < m.eps1 ? 0 : 1;
  return u < m.eps0 ? 1 : 0;
}

}  // namespace

void ReadoutModel::validate() const {
  if (eps0 < 0.0 || eps1 < 0.0 || eps0 + eps1 >= 1.0) {
    std::ostringstream err;
    err << "readout model: need eps0, eps1 >= 0 and eps0 + eps1 < 1, got ("
        << eps0 << ", " << eps1 << ")";
    throw std::invalid_argument(err.str());
  }
}

double readout_noise_sigma(const ReadoutModel& m) {
  m.validate();
  const double q = 0.5 * (1.0 + m.eps0 - m.eps1);
  return 2.0 * std::sqrt(q * (1.0 - q)) / (1.0 - m.eps0 - m.eps1);
}

ReadoutModel poisson_readout_model(double mean_counts0, double mean_counts1,
                                   int threshold) {
  if (!(mean_counts0 >= 0.0) || !(mean_counts1 >= 0.0) || threshold < 0) {
    throw std::invalid_argument("poisson readout: bad inputs");
  }
  // P(N <= threshold) by direct summation of the Poisson pmf.
  auto cdf = [](double lambda, int k) {
    double term = std::exp(-lambda);
    double sum = term;
    for (int n = 1; n <= k; ++n) {
      term *= lambda / n;
      sum += term;
    }
    return std::min(1.0, sum);
  };
  ReadoutModel m;
  m.eps0 = 1.0 - cdf(mean_counts0, threshold);  // counts above threshold -> 1
  m.eps1 = cdf(mean_counts1, threshold);
  m.validate();
  return m;
}

PearsonResult pearson_estimate(const ShotRecord& shots) {
  const std::size_t m = shots.shots;
  if (m < 3 || shots.s1.size() != m || shots.s2.size() != m) {
    throw std::invalid_argument("pearson: need M >= 3 paired outcomes");
  }
  std::size_t n1 = 0, n2 = 0, n12 = 0;
  for (std::size_t j = 0; j < m; ++j) {
    n1 += shots.s1[j];
    n2 += shots.s2[j];
    n12 += shots.s1[j] & shots.s2[j];
  }
  const double dm = static_cast<double>(m);
  const double m1 = static_cast<double>(n1) / dm;
  const double m2 = static_cast<double>(n2) / dm;
  const double var1 = m1 * (1.0 - m1);
  const double var2 = m2 * (1.0 - m2);
  if (var1 == 0.0 || var2 == 0.0) {
    throw std::invalid_argument("pearson: constant outcome sequence");
  }
  const double cov = static_cast<double>(n12) / dm - m1 * m2;

  PearsonResult out;
  out.shots = m;
  out.r = std::clamp(cov / std::sqrt(var1 * var2), -1.0, 1.0);
  out.stderr_ = std::max(1.0 - out.r * out.r, 1.0 / dm) / std::sqrt(dm);
  return out;
}

SubtractedCorrelation background_subtract(const PearsonResult& r_corr,
                                          const PearsonResult& r_anti) {
  SubtractedCorrelation out;
  out.signal = 0.5 * (r_corr.r - r_anti.r);
  out.background = 0.5 * (r_corr.r + r_anti.r);
  const double err = 0.5 * std::hypot(r_corr.stderr_, r_anti.stderr_);
  out.signal_stderr = err;
  out.background_stderr = err;
  return out;
}

ShotRecord simulate_driven_experiment(double theta, std::size_t shots,
                                      const ReadoutModel& m1,
                                      const ReadoutModel& m2,
                                      PairingConfig config, StreamKey key,
                                      unsigned n_threads) {
  m1.validate();
  m2.validate();
  if (shots == 0 || shots % 2 != 0) {
    throw std::invalid_argument("driven: shot count must be even");
  }

  ShotRecord rec;
  rec.shots = shots;
  rec.config = config;
  rec.s1.resize(shots);
  rec.s2.resize(shots);

  const double offset2 =
      config == PairingConfig::anticorrelation ? std::numbers::pi : 0.0;

  parallel_for(shots, n_threads, [&](std::size_t j) {
    const double angle1 = theta + (j % 2 == 0 ? 0.0 : std::numbers::pi);
    const double angle2 = angle1 + offset2;
    const double p1 = std::sin(0.5 * angle1) * std::sin(0.5 * angle1);
    const double p2 = std::sin(0.5 * angle2) * std::sin(0.5 * angle2);

    const StreamKey shot_key{key.seed, key.index + j};
    RandomStream out1(shot_key, StreamChannel::outcome1);
    RandomStream out2(shot_key, StreamChannel::outcome2);
    RandomStream read1(shot_key, StreamChannel::readout1);
    RandomStream read2(shot_key, StreamChannel::readout2);

    rec.s1[j] = apply_readout(out1.bernoulli(p1) ? 1 : 0, m1, read1);
    rec.s2[j] = apply_readout(out2.bernoulli(p2) ? 1 : 0, m2, read2);
  });
  return rec;
}

ShotRecord simulate_t2_experiment(std::span<const ToneSpec> tones,
                                  const SenseSequence& seq1,
                                  const SenseSequence& seq2, double chi1,
                                  double chi2, const ReadoutModel& m1,
                                  const ReadoutModel& m2, std::size_t shots,
                                  StreamKey key, unsigned n_threads,
                                  double gamma_e) {
  m1.validate();
  m2.validate();
  if (tones.empty()) throw std::invalid_argument("t2 shots: no tones given");
  if (chi1 < 0.0 || chi2 < 0.0) {
    throw std::invalid_argument("t2 shots: chi exponents must be >= 0");
  }
  if (shots < 1) throw std::invalid_argument("t2 shots: need shots >= 1");

  // Phase geometry does not change shot to shot; precompute it.
  std::vector<ToneGeometry> geo;
  geo.reserve(tones.size());
  for (const auto& tone : tones) {
    geo.push_back(tone_geometry(tone, seq1, seq2, gamma_e));
  }
  const double env1 = std::exp(-chi1);
  const double env2 = std::exp(-chi2);

  ShotRecord rec;
  rec.shots = shots;
  rec.s1.resize(shots);
  rec.s2.resize(shots);

  parallel_for(shots, n_threads, [&](std::size_t j) {
    const StreamKey shot_key{key.seed, key.index + j};
    RandomStream phases(shot_key, StreamChannel::phase);
    RandomStream out1(shot_key, StreamChannel::outcome1);
    RandomStream out2(shot_key, StreamChannel::outcome2);
    RandomStream read1(shot_key, StreamChannel::readout1);
    RandomStream read2(shot_key, StreamChannel::readout2);

    double phi1 = 0.0, phi2 = 0.0;
    for (const auto& g : geo) {
      const double alpha = constants::two_pi * phases.uniform();
      phi1 += g.eta1 * std::cos(alpha + g.psi1);
      phi2 += g.eta2 * std::cos(alpha + g.psi2);
    }
    const double p1 = 0.5 * (1.0 - env1 * std::sin(phi1));
    const double p2 = 0.5 * (1.0 - env2 * std::sin(phi2));
    assert(p1 >= 0.0 && p1 <= 1.0 && p2 >= 0.0 && p2 <= 1.0);

    rec.s1[j] = apply_readout(out1.bernoulli(p1) ? 1 : 0, m1, read1);
    rec.s2[j] = apply_readout(out2.bernoulli(p2) ? 1 : 0, m2, read2);
  });
  return rec;
}

ShotRecord simulate_t1_experiment(const SensorDrive& drive1,
                                  const SensorDrive& drive2,
                                  const NoiseSpec& noise_spec,
                                  double sense_time, std::size_t shots,
                                  const ReadoutModel& m1,
                                  const ReadoutModel& m2, bool pi_pulse1,
                                  bool pi_pulse2, StreamKey key,
                                  unsigned n_threads) {
  m1.validate();
  m2.validate();
  if (shots < 1) throw std::invalid_argument("t1 shots: need shots >= 1");
  if (sense_time < 0.0 ||
      sense_time > noise_spec.duration + 0.5 * noise_spec.dt) {
    throw std::invalid_argument("t1 shots: sense_time outside noise duration");
  }

  const NoiseSynthesizer synth(noise_spec);
  const std::size_t steps = std::min<std::size_t>(
      synth.output_length(),
      static_cast<std::size_t>(std::llround(sense_time / noise_spec.dt)));

  const Vec3 up{0.0, 0.0, 1.0};
  const Vec3 down{0.0, 0.0, -1.0};

  ShotRecord rec;
  rec.shots = shots;
  rec.config =
      pi_pulse1 != pi_pulse2 ? PairingConfig::anticorrelation
                             : PairingConfig::correlation;
  rec.s1.resize(shots);
  rec.s2.resize(shots);

  parallel_for(shots, n_threads, [&](std::size_t j) {
    const StreamKey shot_key{key.seed, key.index + j};
    const NoiseSeries noise = synth.generate(shot_key.index);
    const auto traj = evolve_pair_trajectory(
        drive1, drive2, std::span<const double>(noise.samples.data(), steps),
        noise.dt, pi_pulse1 ? down : up, pi_pulse2 ? down : up);

    RandomStream out1(shot_key, StreamChannel::outcome1);
    RandomStream out2(shot_key, StreamChannel::outcome2);
    RandomStream read1(shot_key, StreamChannel::readout1);
    RandomStream read2(shot_key, StreamChannel::readout2);

    const double p1 = 0.5 * (1.0 - traj.s1[steps].z);
    const double p2 = 0.5 * (1.0 - traj.s2[steps].z);
    rec.s1[j] = apply_readout(out1.bernoulli(p1) ? 1 : 0, m1, read1);
    rec.s2[j] = apply_readout(out2.bernoulli(p2) ? 1 : 0, m2, read2);
  });
  return rec;
}

SensitivityResult sensitivity_minimum_field(const SensitivityTiming& timing,
                                            double sigma_r1, double sigma_r2,
                                            double c1, double c2,
                                            double filter_w, double t_total,
                                            double gamma_e) {
  if (!(timing.t_init > 0.0) || !(timing.t_sense > 0.0) ||
      !(timing.t_read > 0.0) || !(t_total > 0.0)) {
    throw std::invalid_argument("sensitivity: all times must be > 0");
  }
  if (!(sigma_r1 >= 1.0) || !(sigma_r2 >= 1.0)) {
    throw std::invalid_argument("sensitivity: readout noise must be >= 1");
  }
  if (!(c1 > 0.0 && c1 <= 1.0) || !(c2 > 0.0 && c2 <= 1.0)) {
    throw std::invalid_argument("sensitivity: coherences must lie in (0, 1]");
  }
  if (!(filter_w > 0.0)) {
    throw std::invalid_argument("sensitivity: filter weight must be > 0");
  }

  const double cycle = timing.t_init + timing.t_sense + timing.t_read;
  const auto reps = static_cast<std::size_t>(std::floor(t_total / cycle));
  if (reps == 0) {
    throw std::invalid_argument(
        "sensitivity: total time shorter than one cycle");
  }

  SensitivityResult out;
  out.repetitions = reps;
  out.sigma_b_min = std::sqrt(2.0 * sigma_r1 * sigma_r2 / (c1 * c2)) /
                    (gamma_e * timing.t_sense * filter_w) *
                    std::pow(static_cast<double>(reps), -0.25);
  out.sensitivity = out.sigma_b_min * std::pow(t_total, 0.25);
  return out;
}

}  // namespace covmag
