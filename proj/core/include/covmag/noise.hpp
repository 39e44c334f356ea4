#pragma once

// Colored Gaussian noise G(t) with autocorrelation exp(-dt^2 / (2 tau_c^2)),
// synthesized by FFT spectral filtering of white Gaussian samples. The
// working grid is extended by >= 10 tau_c beyond the requested duration and
// cropped afterwards, which pushes circular-correlation leakage below double
// precision.

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "covmag/stream.hpp"

namespace covmag {

struct NoiseSpec {
  double tau_c = 0.0;     // correlation time, s
  double duration = 0.0;  // total time, s (>= 20 tau_c)
  double dt = 0.0;        // sample spacing, s (<= tau_c / 10)
  StreamKey stream_key;

  // Throws std::invalid_argument with a diagnostic if any invariant fails.
  void validate() const;

  std::size_t sample_count() const;

  static double default_dt(double tau_c) { return tau_c / 20.0; }
};

struct NoiseSeries {
  double dt = 0.0;
  std::vector<double> samples;
};

// Precomputes the spectral amplitude for one (tau_c, duration, dt) geometry
// so that ensembles pay the filter setup only once. Thread-safe after
// construction; generate() is const and reentrant.
class NoiseSynthesizer {
 public:
  explicit NoiseSynthesizer(const NoiseSpec& spec);
  ~NoiseSynthesizer();

  NoiseSynthesizer(const NoiseSynthesizer&) = delete;
  NoiseSynthesizer& operator=(const NoiseSynthesizer&) = delete;

  // Realization for (spec.seed, realization_index); bit-reproducible.
  NoiseSeries generate(std::uint64_t realization_index) const;

  std::size_t output_length() const;
  std::size_t padded_length() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper around NoiseSynthesizer.
NoiseSeries generate_gaussian_noise(const NoiseSpec& spec);

// Biased autocorrelation estimate C(k) = (1/L) sum_j x_j x_{j+k}, normalized
// by C(0). Returns (lag seconds, value) for k = 0..max_lag.
std::vector<std::pair<double, double>> estimate_autocorrelation(
    const NoiseSeries& series, std::size_t max_lag);

// Uniform phase on [0, 2pi), reproducible by stream key.
double draw_uniform_phase(StreamKey key);

}  // namespace covmag
