#include "covmag/bloch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "covmag/parallel.hpp"

namespace covmag {

double norm(Vec3 v) { return std::sqrt(dot(v, v)); }

Vec3 rotation_step(Vec3 s, Vec3 h, double dt) {
  const double mag = norm(h);
  if (mag == 0.0) return s;
  const Vec3 axis = (1.0 / mag) * h;
  const double angle = mag * dt;
  const double c = std::cos(angle);
  const double si = std::sin(angle);
  return c * s + ((1.0 - c) * dot(axis, s)) * axis + si * cross(axis, s);
}

namespace {

struct StepCoeffs {
  double hx2, hy2, hz;  // hx = hx2 * G, hy = hy2 * G, hz constant
};

StepCoeffs coeffs(const SensorDrive& d) {
  return {2.0 * d.amplitude.real(), -2.0 * d.amplitude.imag(), d.detuning};
}

double max_field(const StepCoeffs& c, double g_max) {
  const double transverse = std::hypot(c.hx2, c.hy2) * g_max;
  return std::hypot(transverse, c.hz);
}

void check_step_size(const StepCoeffs& c1, const StepCoeffs& c2,
                     std::span<const double> samples, double dt) {
  double g_max = 0.0;
  for (double g : samples) g_max = std::max(g_max, std::abs(g));
  const double worst = std::max(max_field(c1, g_max), max_field(c2, g_max));
  if (dt * worst >= 0.1) {
    std::ostringstream err;
    err << "trajectory step too coarse: dt * max|h| = " << dt * worst
        << " (limit 0.1)";
    throw std::invalid_argument(err.str());
  }
}

}  // namespace

PairTrajectory evolve_pair_trajectory(const SensorDrive& drive1,
                                      const SensorDrive& drive2,
                                      std::span<const double> samples,
                                      double dt, Vec3 s1_0, Vec3 s2_0) {
  const StepCoeffs c1 = coeffs(drive1);
  const StepCoeffs c2 = coeffs(drive2);
  check_step_size(c1, c2, samples, dt);

  PairTrajectory traj;
  traj.dt = dt;
  traj.s1.reserve(samples.size() + 1);
  traj.s2.reserve(samples.size() + 1);
  traj.s1.push_back(s1_0);
  traj.s2.push_back(s2_0);

  Vec3 s1 = s1_0;
  Vec3 s2 = s2_0;
  for (double g : samples) {
    s1 = rotation_step(s1, {c1.hx2 * g, c1.hy2 * g, c1.hz}, dt);
    s2 = rotation_step(s2, {c2.hx2 * g, c2.hy2 * g, c2.hz}, dt);
    traj.s1.push_back(s1);
    traj.s2.push_back(s2);
  }
  return traj;
}

PairTrajectory evolve_pair_trajectory(const SensorDrive& drive1,
                                      const SensorDrive& drive2,
                                      const NoiseSeries& noise, Vec3 s1_0,
                                      Vec3 s2_0) {
  return evolve_pair_trajectory(drive1, drive2, noise.samples, noise.dt, s1_0,
                                s2_0);
}

EnsembleStats ensemble_statistics(const SensorDrive& drive1,
                                  const SensorDrive& drive2,
                                  const NoiseSpec& noise_spec,
                                  std::size_t n_traj,
                                  std::span<const double> t_grid,
                                  unsigned n_threads) {
  if (n_traj < 1) throw std::invalid_argument("ensemble: n_traj must be >= 1");
  for (double t : t_grid) {
    if (t < 0.0 || t > noise_spec.duration + 0.5 * noise_spec.dt) {
      throw std::invalid_argument("ensemble: t_grid outside noise duration");
    }
  }

  const NoiseSynthesizer synth(noise_spec);
  const std::size_t n_times = t_grid.size();

  // Grid times to sample indices (state j is time j*dt).
  std::vector<std::size_t> idx(n_times);
  for (std::size_t k = 0; k < n_times; ++k) {
    idx[k] = std::min<std::size_t>(
        synth.output_length(),
        static_cast<std::size_t>(std::llround(t_grid[k] / noise_spec.dt)));
  }
  const std::size_t horizon =
      n_times == 0 ? 0 : *std::max_element(idx.begin(), idx.end());

  // Per-trajectory slots; reduced serially afterwards in index order.
  std::vector<double> v1(n_traj * n_times), v2(n_traj * n_times),
      v12(n_traj * n_times);

  parallel_for(n_traj, n_threads, [&](std::size_t i) {
    const NoiseSeries noise =
        synth.generate(noise_spec.stream_key.index + i);
    const auto traj = evolve_pair_trajectory(
        drive1, drive2,
        std::span<const double>(noise.samples.data(), horizon), noise.dt,
        {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0});
    for (std::size_t k = 0; k < n_times; ++k) {
      const double a = traj.s1[idx[k]].z;
      const double b = traj.s2[idx[k]].z;
      v1[i * n_times + k] = a;
      v2[i * n_times + k] = b;
      v12[i * n_times + k] = a * b;
    }
  });

  EnsembleStats stats;
  stats.n_traj = n_traj;
  stats.t.assign(t_grid.begin(), t_grid.end());
  stats.mean_s1z.resize(n_times);
  stats.mean_s2z.resize(n_times);
  stats.mean_s1z_s2z.resize(n_times);
  stats.se_s1z.resize(n_times);
  stats.se_s2z.resize(n_times);
  stats.se_s1z_s2z.resize(n_times);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < n_times; ++k) {
    auto reduce = [&](const std::vector<double>& v, double& mean, double& se) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n_traj; ++i) sum += v[i * n_times + k];
      mean = sum / static_cast<double>(n_traj);
      if (n_traj < 2) {
        se = nan;
        return;
      }
      double ss = 0.0;
      for (std::size_t i = 0; i < n_traj; ++i) {
        const double d = v[i * n_times + k] - mean;
        ss += d * d;
      }
      se = std::sqrt(ss / static_cast<double>(n_traj - 1) /
                     static_cast<double>(n_traj));
    };
    reduce(v1, stats.mean_s1z[k], stats.se_s1z[k]);
    reduce(v2, stats.mean_s2z[k], stats.se_s2z[k]);
    reduce(v12, stats.mean_s1z_s2z[k], stats.se_s1z_s2z[k]);
  }
  return stats;
}

}  // namespace covmag
