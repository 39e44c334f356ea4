#pragma once

// Markovian limit of the two-sensor dynamics: single-spin relaxation under
// the amplitude-noisy drive, and the closed linear system for the live
// components of the correlation tensor Phi_ab = tr(rho sigma1^a sigma2^b),
// ordered (zz, yy, xx, xy, yx). Phi_zz(t) is a sum of five exponentials
// obtained by eigendecomposition of the generator, with a dense matrix
// exponential as fallback for defective generators.

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace covmag {

struct QmeParams {
  double gamma1 = 0.0;  // T1 relaxation rates, 1/s
  double gamma2 = 0.0;
  double delta1 = 0.0;  // detunings, rad/s
  double delta2 = 0.0;
  double gd11 = 0.0;    // dephasing matrix, 1/s; must be positive semidefinite
  double gd22 = 0.0;
  double gd12 = 0.0;
  double r0 = 1.0;      // overall correlation prefactor

  void validate() const;
};

using CorrelationVector = std::array<double, 5>;  // (zz, yy, xx, xy, yx)
using GeneratorMatrix = std::array<std::array<double, 5>, 5>;

inline constexpr CorrelationVector correlation_initial_state{1.0, 0.0, 0.0,
                                                             0.0, 0.0};

// Gamma = 2 sqrt(2pi) tau_c |A|^2 for drive amplitude A (rad/s).
double relaxation_rate(std::complex<double> amplitude, double tau_c);

// Same via an effective field amplitude, |A| = gamma_e * b_eff:
// Gamma = 2 (gamma_e B)^2 sqrt(2pi) tau_c.
double relaxation_rate_from_field(double b_eff, double tau_c,
                                  double gamma_e);

// Inverts relaxation_rate for |A| at fixed tau_c.
double amplitude_for_rate(double hgamma, double tau_c);

struct SingleSpin {
  double s_z = 0.0;    // exp(-Gamma t)
  double mean_s = 0.0; // population of |-1> starting from |0>
};
SingleSpin single_spin_polarization(double hgamma, double t);

// Generator M with d/dt Phi = M Phi in the (zz, yy, xx, xy, yx) ordering.
GeneratorMatrix build_correlation_generator(const QmeParams& p);

struct TensorEvolution {
  std::vector<double> t;
  std::vector<double> phi_zz;
  std::vector<CorrelationVector> phi;  // full live vector per time
  bool used_expm_fallback = false;
};

TensorEvolution evolve_correlation_tensor(const QmeParams& p,
                                          std::span<const double> t_grid);

// Connected zz correlator without dephasing and detuning:
// [cosh(2 t sqrt(G1 G2)) - 1] exp(-(G1 + G2) t).
double analytic_connected_zz(double gamma1, double gamma2, double t);

// Pearson correlation model for the co-relaxation experiment:
//   r(t) = r0 [Phi_zz - exp(-(G1+G2) t)] /
//          (sR1 sR2 sqrt((1 - e^{-2 G1 t})(1 - e^{-2 G2 t}))),
// with the analytic small-t limit r0 sqrt(G1 G2) t / (sR1 sR2) used near
// t = 0 where the ratio is 0/0.
double pearson_model_t1(const QmeParams& p, double sigma_r1, double sigma_r2,
                        double t);

// Evaluates the model on a grid with one eigendecomposition (used by fits).
std::vector<double> pearson_model_t1_grid(const QmeParams& p, double sigma_r1,
                                          double sigma_r2,
                                          std::span<const double> t_grid);

namespace detail {
// Scaling-and-squaring Pade matrix exponential for small dense systems.
std::vector<double> expm_dense(const std::vector<double>& a, std::size_t n);
}  // namespace detail

}  // namespace covmag
