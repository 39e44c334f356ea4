#pragma once

// Stochastic two-sensor Bloch dynamics. Both spins see the same noise
// realization G(t) through their own drive amplitudes; each step applies the
// exact rotation generated by the piecewise-constant field, so |s| is
// preserved along the whole trajectory.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "covmag/noise.hpp"

namespace covmag {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double c, Vec3 v) { return {c * v.x, c * v.y, c * v.z}; }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double norm(Vec3 v);

// Rotating-frame drive of one sensor: complex amplitude A (rad/s) multiplying
// the shared noise, plus detuning delta (rad/s). The instantaneous field is
// h = (2 Re[A] G, -2 Im[A] G, delta).
struct SensorDrive {
  std::complex<double> amplitude{0.0, 0.0};
  double detuning = 0.0;
};

struct PairTrajectory {
  double dt = 0.0;
  std::vector<Vec3> s1, s2;  // equal lengths; index j is time j*dt
};

// Exact solution at time dt of ds/dt = h x s for constant h (h = 0 is the
// identity).
Vec3 rotation_step(Vec3 s, Vec3 h, double dt);

// Advances both sensors through one shared noise realization. Throws if
// dt * max|h| >= 0.1 for either sensor (piecewise-constant-field accuracy
// bound). Trajectories have samples.size() + 1 points including t = 0.
PairTrajectory evolve_pair_trajectory(const SensorDrive& drive1,
                                      const SensorDrive& drive2,
                                      const NoiseSeries& noise, Vec3 s1_0,
                                      Vec3 s2_0);

// Same, on a sample span (used for chunked evolution and partial horizons).
PairTrajectory evolve_pair_trajectory(const SensorDrive& drive1,
                                      const SensorDrive& drive2,
                                      std::span<const double> samples,
                                      double dt, Vec3 s1_0, Vec3 s2_0);

struct EnsembleStats {
  std::vector<double> t;
  std::vector<double> mean_s1z, mean_s2z, mean_s1z_s2z;
  // Standard errors are NaN when n_traj < 2.
  std::vector<double> se_s1z, se_s2z, se_s1z_s2z;
  std::size_t n_traj = 0;
};

// Averages s1z, s2z and s1z*s2z over n_traj independent noise realizations
// (stream indices spec.stream_key.index .. +n_traj-1). Output is identical
// for any thread count.
EnsembleStats ensemble_statistics(const SensorDrive& drive1,
                                  const SensorDrive& drive2,
                                  const NoiseSpec& noise_spec,
                                  std::size_t n_traj,
                                  std::span<const double> t_grid,
                                  unsigned n_threads = 1);

}  // namespace covmag
