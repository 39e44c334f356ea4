#include "covmag/noise.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "covmag/constants.hpp"

namespace covmag {

namespace {

// FFTW planning is not reentrant; execution of a private plan is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffers {
  std::size_t n = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  explicit FftwBuffers(std::size_t length) : n(length) {
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, spec,
                                   FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real,
                                    FFTW_ESTIMATE);
  }

  ~FftwBuffers() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spec);
  }
};

}  // namespace

void NoiseSpec::validate() const {
  std::ostringstream err;
  if (!(tau_c > 0.0)) {
    err << "noise spec: tau_c must be > 0, got " << tau_c;
  } else if (!(dt > 0.0)) {
    err << "noise spec: dt must be > 0, got " << dt;
  } else if (duration < 20.0 * tau_c) {
    err << "noise spec: duration " << duration << " s shorter than 20 tau_c = "
        << 20.0 * tau_c << " s";
  } else if (dt > tau_c / 10.0 * (1.0 + 1e-12)) {
    err << "noise spec: dt " << dt << " s exceeds tau_c/10 = " << tau_c / 10.0
        << " s";
  } else {
    return;
  }
  throw std::invalid_argument(err.str());
}

std::size_t NoiseSpec::sample_count() const {
  return static_cast<std::size_t>(std::llround(duration / dt));
}

struct NoiseSynthesizer::Impl {
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::size_t out_len = 0;
  std::size_t padded = 0;
  std::vector<double> amplitude;  // sqrt of circulant spectrum, length n/2+1

  Impl(const NoiseSpec& spec) {
    spec.validate();
    seed = spec.stream_key.seed;
    dt = spec.dt;
    out_len = spec.sample_count();
    const auto pad = static_cast<std::size_t>(std::ceil(10.0 * spec.tau_c / dt));
    padded = std::bit_ceil(out_len + pad);

    // Target circulant autocovariance and its (real, nonnegative) spectrum.
    FftwBuffers fft(padded);
    const double inv_2tc2 = 1.0 / (2.0 * spec.tau_c * spec.tau_c);
    for (std::size_t j = 0; j < padded; ++j) {
      const double lag = static_cast<double>(std::min(j, padded - j)) * dt;
      fft.real[j] = std::exp(-lag * lag * inv_2tc2);
    }
    fftw_execute(fft.forward);
    amplitude.resize(padded / 2 + 1);
    for (std::size_t k = 0; k < amplitude.size(); ++k) {
      amplitude[k] = std::sqrt(std::max(0.0, fft.spec[k][0]));
    }
  }
};

NoiseSynthesizer::NoiseSynthesizer(const NoiseSpec& spec)
    : impl_(std::make_unique<Impl>(spec)) {}

NoiseSynthesizer::~NoiseSynthesizer() = default;

std::size_t NoiseSynthesizer::output_length() const { return impl_->out_len; }
std::size_t NoiseSynthesizer::padded_length() const { return impl_->padded; }

NoiseSeries NoiseSynthesizer::generate(std::uint64_t realization_index) const {
  const auto& st = *impl_;
  FftwBuffers fft(st.padded);

  RandomStream rng({st.seed, realization_index}, StreamChannel::noise);
  rng.fill_normal(fft.real, st.padded);
  fftw_execute(fft.forward);

  const double norm = 1.0 / static_cast<double>(st.padded);
  for (std::size_t k = 0; k < st.amplitude.size(); ++k) {
    fft.spec[k][0] *= st.amplitude[k] * norm;
    fft.spec[k][1] *= st.amplitude[k] * norm;
  }
  fftw_execute(fft.backward);

  NoiseSeries out;
  out.dt = st.dt;
  out.samples.assign(fft.real, fft.real + st.out_len);
  return out;
}

NoiseSeries generate_gaussian_noise(const NoiseSpec& spec) {
  return NoiseSynthesizer(spec).generate(spec.stream_key.index);
}

std::vector<std::pair<double, double>> estimate_autocorrelation(
    const NoiseSeries& series, std::size_t max_lag) {
  const std::size_t n = series.samples.size();
  if (max_lag >= n / 4) {
    std::ostringstream err;
    err << "autocorrelation: max_lag " << max_lag << " must be < length/4 = "
        << n / 4;
    throw std::invalid_argument(err.str());
  }
  const double* x = series.samples.data();
  double c0 = 0.0;
  for (std::size_t j = 0; j < n; ++j) c0 += x[j] * x[j];
  c0 /= static_cast<double>(n);
  if (c0 == 0.0) throw std::invalid_argument("autocorrelation: zero series");

  // Mean lagged product per lag, so a constant series estimates to exactly 1
  // at every lag.
  std::vector<std::pair<double, double>> out;
  out.reserve(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double ck = 0.0;
    for (std::size_t j = 0; j + k < n; ++j) ck += x[j] * x[j + k];
    ck /= static_cast<double>(n - k);
    out.emplace_back(static_cast<double>(k) * series.dt, ck / c0);
  }
  return out;
}

double draw_uniform_phase(StreamKey key) {
  RandomStream rng(key, StreamChannel::phase);
  return constants::two_pi * rng.uniform();
}

}  // namespace covmag
