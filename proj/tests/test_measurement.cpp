#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <covmag/measurement.hpp>
#include <covmag/qme.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "test_util.hpp"

using namespace covmag;

namespace {

double mean_of(const std::vector<std::uint8_t>& xs) {
  double sum = 0.0;
  for (auto x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

ReadoutModel symmetric_for_sigma(double sigma_r) {
  // sigma_R = 1/(1 - 2 eps) for eps0 = eps1 = eps.
  const double eps = 0.5 * (1.0 - 1.0 / sigma_r);
  return {eps, eps};
}

}  // namespace

TEST_CASE("readout noise model") {
  CHECK(readout_noise_sigma({0.0, 0.0}) == 1.0);
  CHECK(readout_noise_sigma({0.1, 0.1}) == doctest::Approx(1.25));
  CHECK_THROWS_AS(readout_noise_sigma({0.6, 0.5}), std::invalid_argument);

  // Monotone in the symmetric error rate.
  double prev = 1.0;
  for (double eps = 0.02; eps < 0.5; eps += 0.02) {
    const double s = readout_noise_sigma({eps, eps});
    CHECK(s > prev);
    prev = s;
  }

  // The paper-grade readout pair caps the detectable correlation at 0.0794.
  const double r_max = 1.0 / (3.5 * 3.6);
  CHECK(r_max == doctest::Approx(0.0794).epsilon(2e-3));
}

TEST_CASE("poisson threshold helper") {
  const ReadoutModel m = poisson_readout_model(0.5, 10.0, 2);
  // Independent sums of the Poisson pmf.
  const double e0 = 1.0 - std::exp(-0.5) * (1.0 + 0.5 + 0.125);
  const double e1 = std::exp(-10.0) * (1.0 + 10.0 + 50.0);
  CHECK(m.eps0 == doctest::Approx(e0).epsilon(1e-12));
  CHECK(m.eps1 == doctest::Approx(e1).epsilon(1e-12));
  CHECK(readout_noise_sigma(m) > 1.0);
}

TEST_CASE("pearson estimator") {
  ShotRecord rec;
  rec.shots = 8;
  rec.s1 = {1, 0, 1, 1, 0, 0, 1, 0};

  SUBCASE("identical sequences: r = 1 with a positive stderr") {
    rec.s2 = rec.s1;
    const auto res = pearson_estimate(rec);
    CHECK(res.r == 1.0);
    CHECK(res.stderr_ > 0.0);
  }

  SUBCASE("complementary sequences: r = -1") {
    rec.s2.resize(8);
    for (int i = 0; i < 8; ++i) rec.s2[i] = 1 - rec.s1[i];
    CHECK(pearson_estimate(rec).r == -1.0);
  }

  SUBCASE("degenerate inputs are rejected") {
    rec.s2 = std::vector<std::uint8_t>(8, 1);
    CHECK_THROWS_AS(pearson_estimate(rec), std::invalid_argument);
    ShotRecord tiny{2, {0, 1}, {1, 0}, PairingConfig::correlation};
    CHECK_THROWS_AS(pearson_estimate(tiny), std::invalid_argument);
  }

  SUBCASE("independent fair coins stay below 3/sqrt(M)") {
    const std::size_t m = 1000000;
    ShotRecord coins;
    coins.shots = m;
    coins.s1.resize(m);
    coins.s2.resize(m);
    RandomStream rng({31337, 0}, StreamChannel::fit);
    for (std::size_t j = 0; j < m; ++j) {
      coins.s1[j] = rng.bernoulli(0.5) ? 1 : 0;
      coins.s2[j] = rng.bernoulli(0.5) ? 1 : 0;
    }
    const auto res = pearson_estimate(coins);
    CHECK(std::abs(res.r) < 3.0 / std::sqrt(static_cast<double>(m)));
    CHECK(res.stderr_ ==
          doctest::Approx(1.0 / std::sqrt(static_cast<double>(m)))
              .epsilon(1e-3));
  }
}

TEST_CASE("stderr scales as M^{-1/2}") {
  // Driven shots at theta = pi/3 for a range of M.
  const ReadoutModel ideal{0.0, 0.0};
  std::vector<double> log_m, log_se;
  for (std::size_t m : {1000u, 10000u, 100000u, 1000000u}) {
    const auto rec = simulate_driven_experiment(
        std::numbers::pi / 3.0, m, ideal, ideal,
        PairingConfig::correlation, {77, 0}, 2);
    const auto res = pearson_estimate(rec);
    log_m.push_back(std::log(static_cast<double>(m)));
    log_se.push_back(std::log(res.stderr_));
  }
  // Least-squares slope of log(se) vs log(M).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(log_m.size());
  for (std::size_t i = 0; i < log_m.size(); ++i) {
    sx += log_m[i];
    sy += log_se[i];
    sxx += log_m[i] * log_m[i];
    sxy += log_m[i] * log_se[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.02));
}

TEST_CASE("background subtraction") {
  const PearsonResult corr{0.05, 0.004, 1000};
  const PearsonResult anti{-0.03, 0.003, 1000};
  const auto out = background_subtract(corr, anti);
  CHECK(out.signal == doctest::Approx(0.04));
  CHECK(out.background == doctest::Approx(0.01));
  CHECK(out.signal_stderr == doctest::Approx(0.5 * std::hypot(0.004, 0.003)));

  const auto sym = background_subtract({0.05, 0.004, 1000},
                                       {-0.05, 0.004, 1000});
  CHECK(sym.background == 0.0);
}

TEST_CASE("driven shots reproduce cos^2(theta)/(sR1 sR2)") {
  const ReadoutModel m1 = symmetric_for_sigma(3.5);
  const ReadoutModel m2 = symmetric_for_sigma(3.6);
  const double ceiling = 1.0 / (readout_noise_sigma(m1) *
                                readout_noise_sigma(m2));
  const std::size_t shots = 400000;

  CHECK_THROWS_AS(simulate_driven_experiment(0.0, 12345, m1, m2,
                                             PairingConfig::correlation,
                                             {9, 0}),
                  std::invalid_argument);

  SUBCASE("theta = 0 hits the readout ceiling") {
    const auto rec = simulate_driven_experiment(
        0.0, shots, m1, m2, PairingConfig::correlation, {10, 0}, 2);
    const auto res = pearson_estimate(rec);
    CHECK(std::abs(res.r - ceiling) < 3.0 * res.stderr_);
    CHECK(mean_of(rec.s1) == doctest::Approx(0.5).epsilon(0.01));
  }

  SUBCASE("theta = pi/2 has no correlation to detect") {
    const auto rec = simulate_driven_experiment(
        std::numbers::pi / 2.0, shots, m1, m2, PairingConfig::correlation,
        {11, 0}, 2);
    const auto res = pearson_estimate(rec);
    CHECK(std::abs(res.r) < 3.0 * res.stderr_);
  }

  SUBCASE("theta = pi/4 gives half the ceiling") {
    const auto rec = simulate_driven_experiment(
        std::numbers::pi / 4.0, shots, m1, m2, PairingConfig::correlation,
        {12, 0}, 2);
    const auto res = pearson_estimate(rec);
    CHECK(std::abs(res.r - 0.5 * ceiling) < 3.0 * res.stderr_);
  }

  SUBCASE("anticorrelation flips the sign; subtraction recovers the signal") {
    const auto corr = simulate_driven_experiment(
        0.0, shots, m1, m2, PairingConfig::correlation, {13, 0}, 2);
    const auto anti = simulate_driven_experiment(
        0.0, shots, m1, m2, PairingConfig::anticorrelation, {14, 0}, 2);
    const auto rc = pearson_estimate(corr);
    const auto ra = pearson_estimate(anti);
    CHECK(std::abs(ra.r + ceiling) < 3.0 * ra.stderr_);
    const auto sub = background_subtract(rc, ra);
    CHECK(std::abs(sub.signal - ceiling) < 3.0 * sub.signal_stderr);
    CHECK(std::abs(sub.background) < 3.0 * sub.background_stderr);
  }
}

TEST_CASE("readout flips attenuate r by exactly 1/(sR1 sR2)") {
  // Asymmetric error rates; the sigma_R closed form must still predict the
  // attenuation of a theta = 0 driven record.
  const ReadoutModel m1{0.05, 0.20};
  const ReadoutModel m2{0.12, 0.03};
  const std::size_t shots = 1000000;
  const auto rec = simulate_driven_experiment(
      0.0, shots, m1, m2, PairingConfig::correlation, {21, 0}, 2);
  const auto res = pearson_estimate(rec);
  const double predicted =
      1.0 / (readout_noise_sigma(m1) * readout_noise_sigma(m2));
  CHECK(std::abs(res.r - predicted) < 3.0 * res.stderr_);
}

TEST_CASE("shot records are reproducible by stream key") {
  const ReadoutModel m{0.1, 0.2};
  const auto a = simulate_driven_experiment(0.7, 2000, m, m,
                                            PairingConfig::correlation,
                                            {5150, 3}, 2);
  const auto b = simulate_driven_experiment(0.7, 2000, m, m,
                                            PairingConfig::correlation,
                                            {5150, 3}, 1);
  CHECK(a.s1 == b.s1);
  CHECK(a.s2 == b.s2);
}

TEST_CASE("t2 shots follow the closed-form lineshape") {
  SenseSequence seq{40, 200e-9, 0.0};
  const ReadoutModel ideal{0.0, 0.0};

  SUBCASE("no field means no signal") {
    const ToneSpec quiet[1] = {{2.5e6, 0.0, 0.0, 0.0}};
    const auto rec = simulate_t2_experiment(quiet, seq, seq, 0.0, 0.0, ideal,
                                            ideal, 200000, {31, 0}, 2);
    const auto res = pearson_estimate(rec);
    CHECK(std::abs(mean_of(rec.s1) - 0.5) < 3.0 * 0.5 / std::sqrt(200000.0));
    CHECK(std::abs(res.r) < 3.0 * res.stderr_);
  }

  SUBCASE("symmetric single tone matches the Bessel form") {
    const ToneSpec tones[1] = {{2.5e6, 1.944e-6, 0.56 * 1.944e-6, 25e3}};
    const DecoherenceInputs dec{0.1, 0.15, 1.0, 1.0};
    const double expected =
        correlation_lineshape(tones, seq, seq, dec, 1.0);
    const auto rec = simulate_t2_experiment(tones, seq, seq, dec.chi1,
                                            dec.chi2, ideal, ideal, 100000,
                                            {32, 0}, 2);
    const auto res = pearson_estimate(rec);
    CHECK(std::abs(res.r - expected) < 3.0 * res.stderr_);
  }

  SUBCASE("mean product stays flat in delay while r oscillates") {
    const ToneSpec tones[1] = {{2.5e6, 1.944e-6, 1.5e-6, 25e3}};
    SenseSequence half = seq;
    half.delay = 1.0 / (2.0 * tones[0].f);
    const auto at_zero = simulate_t2_experiment(tones, seq, seq, 0.0, 0.0,
                                                ideal, ideal, 100000, {33, 0},
                                                2);
    const auto at_half = simulate_t2_experiment(tones, seq, half, 0.0, 0.0,
                                                ideal, ideal, 100000, {34, 0},
                                                2);
    const auto r0 = pearson_estimate(at_zero);
    const auto r1 = pearson_estimate(at_half);
    // r flips sign across half a period of the tone.
    CHECK(std::abs(r0.r + r1.r) < 3.0 * std::hypot(r0.stderr_, r1.stderr_));
    CHECK(r0.r > 5.0 * r0.stderr_);
    // <S1><S2> is featureless.
    const double p_zero = mean_of(at_zero.s1) * mean_of(at_zero.s2);
    const double p_half = mean_of(at_half.s1) * mean_of(at_half.s2);
    CHECK(std::abs(p_zero - p_half) < 5.0 / std::sqrt(100000.0));
    CHECK(p_zero == doctest::Approx(0.25).epsilon(0.02));
  }
}

TEST_CASE("t1 shots relax like the master equation") {
  NoiseSpec spec;
  spec.tau_c = 1e-7;
  // tau_c/20 keeps dt*max|h| clear of the step guard at these rates even for
  // the occasional 5-sigma noise excursion.
  spec.dt = spec.tau_c / 20.0;
  spec.duration = 20.0 * spec.tau_c;
  spec.stream_key = {41, 0};

  const double g1 = 5.1e5, g2 = 5.65e5;
  const SensorDrive d1{{amplitude_for_rate(g1, spec.tau_c), 0.0}, 0.0};
  const SensorDrive d2{{amplitude_for_rate(g2, spec.tau_c), 0.0}, 0.0};
  const ReadoutModel ideal{0.0, 0.0};

  SUBCASE("zero sense time only reflects readout flips") {
    const auto rec = simulate_t1_experiment(d1, d2, spec, 0.0, 5000, ideal,
                                            ideal, false, false, {42, 0}, 2);
    for (auto s : rec.s1) CHECK(s == 0);
    const ReadoutModel noisy{0.3, 0.0};
    const auto flipped = simulate_t1_experiment(d1, d2, spec, 0.0, 50000,
                                                noisy, noisy, false, false,
                                                {43, 0}, 2);
    CHECK(mean_of(flipped.s1) == doctest::Approx(0.3).epsilon(0.05));
  }

  SUBCASE("pi pulses start the sensor inverted") {
    const auto rec = simulate_t1_experiment(d1, d2, spec, 0.0, 5000, ideal,
                                            ideal, true, false, {44, 0}, 2);
    for (auto s : rec.s1) CHECK(s == 1);
    for (auto s : rec.s2) CHECK(s == 0);
    CHECK(rec.config == PairingConfig::anticorrelation);
  }

  SUBCASE("mean outcomes follow (1 - exp(-Gamma t))/2") {
    const double t = 1.5e-6;
    const std::size_t shots = 40000;
    const auto rec = simulate_t1_experiment(d1, d2, spec, t, shots, ideal,
                                            ideal, false, false, {45, 0}, 2);
    const double expect1 = single_spin_polarization(g1, t).mean_s;
    const double expect2 = single_spin_polarization(g2, t).mean_s;
    const double se = 0.5 / std::sqrt(static_cast<double>(shots));
    CHECK(std::abs(mean_of(rec.s1) - expect1) < 3.0 * se + 0.02 * expect1);
    CHECK(std::abs(mean_of(rec.s2) - expect2) < 3.0 * se + 0.02 * expect2);
  }

  SUBCASE("r(t) tracks the master-equation model") {
    const double t = 1.5e-6;
    QmeParams p;
    p.gamma1 = g1;
    p.gamma2 = g2;
    const double expected = pearson_model_t1(p, 1.0, 1.0, t);
    const auto rec = simulate_t1_experiment(d1, d2, spec, t, 40000, ideal,
                                            ideal, false, false, {46, 0}, 2);
    const auto res = pearson_estimate(rec);
    // 3 sigma statistical band plus the finite-bandwidth systematic.
    CHECK(std::abs(res.r - expected) < 3.0 * res.stderr_ + 0.04 * expected);
  }

  SUBCASE("sense time beyond the noise duration is rejected") {
    CHECK_THROWS_AS(simulate_t1_experiment(d1, d2, spec, 3e-6, 100, ideal,
                                           ideal, false, false, {47, 0}),
                    std::invalid_argument);
  }
}

TEST_CASE("sensitivity projection") {
  const SensitivityTiming timing{1.5e-3, 10e-6, 6e-3};
  const double w = 2.0 / std::numbers::pi;

  const auto base = sensitivity_minimum_field(timing, 3.5, 3.6, 0.9, 0.85, w,
                                              2400.0);
  CHECK(base.repetitions == static_cast<std::size_t>(
                                std::floor(2400.0 / (1.5e-3 + 10e-6 + 6e-3))));

  SUBCASE("doubling total time scales the floor by 2^{-1/4}") {
    const auto twice = sensitivity_minimum_field(timing, 3.5, 3.6, 0.9, 0.85,
                                                 w, 4800.0);
    CHECK(twice.sigma_b_min / base.sigma_b_min ==
          doctest::Approx(std::pow(2.0, -0.25)).epsilon(1e-3));
  }

  SUBCASE("doubling the readout noise product costs sqrt(2)") {
    const auto noisier = sensitivity_minimum_field(timing, 7.0, 3.6, 0.9,
                                                   0.85, w, 2400.0);
    CHECK(noisier.sigma_b_min / base.sigma_b_min ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }

  SUBCASE("log-log slope against total time is -1/4") {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double log_t = std::log(60.0); log_t <= std::log(60000.0);
         log_t += 0.2) {
      const double t_total = std::exp(log_t);
      const auto out = sensitivity_minimum_field(timing, 3.5, 3.6, 0.9, 0.85,
                                                 w, t_total);
      const double x = std::log(t_total);
      const double y = std::log(out.sigma_b_min);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(std::abs(slope + 0.25) < 0.001);
  }

  SUBCASE("degenerate inputs are rejected") {
    CHECK_THROWS_AS(sensitivity_minimum_field(timing, 3.5, 3.6, 0.9, 0.85, w,
                                              1e-3),
                    std::invalid_argument);
    CHECK_THROWS_AS(sensitivity_minimum_field(timing, 0.5, 3.6, 0.9, 0.85, w,
                                              100.0),
                    std::invalid_argument);
  }
}
