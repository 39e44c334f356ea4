#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <covmag/noise.hpp>
#include <covmag/parallel.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "test_util.hpp"

using namespace covmag;

namespace {

NoiseSpec base_spec() {
  NoiseSpec spec;
  spec.tau_c = 1e-7;
  spec.duration = 40e-7;  // 40 tau_c
  spec.dt = NoiseSpec::default_dt(spec.tau_c);
  spec.stream_key = {2024, 0};
  return spec;
}

double target_autocorr(double lag, double tau_c) {
  return std::exp(-lag * lag / (2.0 * tau_c * tau_c));
}

}  // namespace

TEST_CASE("invalid specs are rejected with diagnostics") {
  NoiseSpec spec = base_spec();
  spec.tau_c = 0.0;
  CHECK_THROWS_AS(generate_gaussian_noise(spec), std::invalid_argument);

  spec = base_spec();
  spec.dt = -1.0;
  CHECK_THROWS_AS(generate_gaussian_noise(spec), std::invalid_argument);

  spec = base_spec();
  spec.duration = 10.0 * spec.tau_c;
  CHECK_THROWS_AS(generate_gaussian_noise(spec), std::invalid_argument);

  spec = base_spec();
  spec.dt = spec.tau_c / 5.0;
  CHECK_THROWS_AS(generate_gaussian_noise(spec), std::invalid_argument);
}

TEST_CASE("identical stream keys give bit-identical series") {
  const NoiseSpec spec = base_spec();
  const NoiseSeries a = generate_gaussian_noise(spec);
  const NoiseSeries b = generate_gaussian_noise(spec);
  REQUIRE(a.samples.size() == spec.sample_count());
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t j = 0; j < a.samples.size(); ++j) {
    CHECK(a.samples[j] == b.samples[j]);
    REQUIRE(std::isfinite(a.samples[j]));
  }

  // Realization order and threading must not matter.
  const NoiseSynthesizer synth(spec);
  const NoiseSeries late = synth.generate(17);
  synth.generate(3);
  const NoiseSeries again = synth.generate(17);
  CHECK(late.samples == again.samples);

  std::vector<NoiseSeries> parallel(8);
  parallel_for(8, 4, [&](std::size_t i) { parallel[i] = synth.generate(i); });
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(parallel[i].samples == synth.generate(i).samples);
  }
}

TEST_CASE("autocorrelation estimator handles degenerate series") {
  NoiseSeries ones{1e-9, std::vector<double>(256, 1.0)};
  const auto flat = estimate_autocorrelation(ones, 32);
  for (const auto& [lag, value] : flat) CHECK(value == doctest::Approx(1.0));

  NoiseSeries alt{1e-9, {}};
  alt.samples.resize(1024);
  for (std::size_t j = 0; j < alt.samples.size(); ++j) {
    alt.samples[j] = (j % 2 == 0) ? 1.0 : -1.0;
  }
  const auto est = estimate_autocorrelation(alt, 4);
  CHECK(est[1].second == doctest::Approx(-1.0).epsilon(1e-12));

  CHECK_THROWS_AS(estimate_autocorrelation(alt, 300), std::invalid_argument);
}

TEST_CASE("ensemble autocorrelation matches the Gaussian target") {
  NoiseSpec spec = base_spec();
  spec.duration = 60e-7;
  const NoiseSynthesizer synth(spec);
  const std::size_t n_real = 150;
  const std::size_t max_lag = static_cast<std::size_t>(
      std::llround(3.0 * spec.tau_c / spec.dt));

  std::vector<std::vector<double>> per_real(n_real);
  parallel_for(n_real, 2, [&](std::size_t i) {
    const auto series = synth.generate(i);
    const auto est = estimate_autocorrelation(series, max_lag);
    per_real[i].reserve(est.size());
    for (const auto& [lag, value] : est) per_real[i].push_back(value);
  });

  for (std::size_t k = 0; k <= max_lag; k += 5) {
    std::vector<double> vals(n_real);
    for (std::size_t i = 0; i < n_real; ++i) vals[i] = per_real[i][k];
    const auto m = testutil::moments(vals);
    const double lag = static_cast<double>(k) * spec.dt;
    if (k == 0) {
      CHECK(m.mean == doctest::Approx(1.0));
      continue;
    }
    CHECK(std::abs(m.mean - target_autocorr(lag, spec.tau_c)) <
          5.0 * m.stderr_mean);
  }

  // Spot value from the target itself: one correlation time decays to
  // exp(-1/2).
  CHECK(target_autocorr(spec.tau_c, spec.tau_c) ==
        doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("pooled samples are zero-mean and Gaussian") {
  NoiseSpec spec = base_spec();
  spec.duration = 1000.0 * spec.tau_c;
  const NoiseSynthesizer synth(spec);

  // 50 realizations x duration 1000 tau_c: 10^6 pooled samples with
  // N_eff = total duration / tau_c.
  const std::size_t n_real = 50;
  std::vector<std::vector<double>> chunks(n_real);
  parallel_for(n_real, 2, [&](std::size_t i) {
    chunks[i] = synth.generate(i).samples;
  });

  std::size_t total = 0;
  double sum = 0.0, sum2 = 0.0;
  std::vector<double> decimated;  // every 5 tau_c: effectively independent
  const std::size_t stride = static_cast<std::size_t>(
      std::llround(5.0 * spec.tau_c / spec.dt));
  for (const auto& chunk : chunks) {
    for (double x : chunk) {
      sum += x;
      sum2 += x * x;
    }
    total += chunk.size();
    for (std::size_t j = 0; j < chunk.size(); j += stride) {
      decimated.push_back(chunk[j]);
    }
  }
  const double mean = sum / static_cast<double>(total);
  const double stddev = std::sqrt(sum2 / static_cast<double>(total));
  const double n_eff = spec.duration / spec.tau_c * static_cast<double>(n_real);
  CHECK(total >= 1000000);
  CHECK(std::abs(mean) < 4.0 * stddev / std::sqrt(n_eff));
  CHECK(stddev == doctest::Approx(1.0).epsilon(0.05));

  CHECK(decimated.size() > 9000);
  CHECK(std::abs(testutil::excess_kurtosis(decimated)) <
        5.0 * std::sqrt(24.0 / static_cast<double>(decimated.size())));
}

TEST_CASE("average periodogram reproduces the Gaussian spectrum") {
  NoiseSpec spec = base_spec();
  // Long realizations keep the finite-window periodogram bias at the band
  // edge well below the statistical spread.
  spec.duration = 160e-7;
  const NoiseSynthesizer synth(spec);
  const std::size_t n_real = 256;

  const std::size_t length = synth.output_length();
  std::vector<std::vector<double>> series(n_real);
  parallel_for(n_real, 2, [&](std::size_t i) {
    series[i] = synth.generate(i).samples;
  });

  // Band |omega| <= 3/tau_c on the cropped grid's frequencies.
  const double domega =
      2.0 * std::numbers::pi / (static_cast<double>(length) * spec.dt);
  const std::size_t k_max = static_cast<std::size_t>(
      std::floor(3.0 / spec.tau_c / domega));
  REQUIRE(k_max >= 10);

  double rms = 0.0;
  std::size_t bins = 0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double omega = static_cast<double>(k) * domega;
    double avg = 0.0;
    for (const auto& xs : series) {
      double re = 0.0, im = 0.0;
      for (std::size_t j = 0; j < length; ++j) {
        const double arg = omega * static_cast<double>(j) * spec.dt;
        re += xs[j] * std::cos(arg);
        im -= xs[j] * std::sin(arg);
      }
      avg += (re * re + im * im) * spec.dt / static_cast<double>(length);
    }
    avg /= static_cast<double>(n_real);
    const double target = std::sqrt(2.0 * std::numbers::pi) * spec.tau_c *
                          std::exp(-omega * omega * spec.tau_c * spec.tau_c / 2.0);
    const double rel = avg / target - 1.0;
    rms += rel * rel;
    ++bins;
  }
  rms = std::sqrt(rms / static_cast<double>(bins));
  CHECK(rms < 0.10);
}

TEST_CASE("uniform phases are reproducible with flat moments") {
  CHECK(draw_uniform_phase({5, 91}) == draw_uniform_phase({5, 91}));
  CHECK(draw_uniform_phase({5, 91}) != draw_uniform_phase({5, 92}));

  const std::size_t n = 1000000;
  double sum_cos = 0.0, sum_cos2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = draw_uniform_phase({77, i});
    REQUIRE(alpha >= 0.0);
    REQUIRE(alpha < 2.0 * std::numbers::pi);
    const double c = std::cos(alpha);
    sum_cos += c;
    sum_cos2 += c * c;
  }
  const double bound = 4.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum_cos / static_cast<double>(n)) < bound);
  CHECK(std::abs(sum_cos2 / static_cast<double>(n) - 0.5) < bound);
}
