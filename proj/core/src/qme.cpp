#include "covmag/qme.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "covmag/constants.hpp"

namespace covmag {

namespace {

constexpr double sqrt_2pi = 2.5066282746310002;

using Matrix5d = Eigen::Matrix<double, 5, 5>;
using Matrix5cd = Eigen::Matrix<std::complex<double>, 5, 5>;
using Vector5d = Eigen::Matrix<double, 5, 1>;
using Vector5cd = Eigen::Matrix<std::complex<double>, 5, 1>;

Matrix5d generator_matrix(const QmeParams& p) {
  const double g_sum = p.gamma1 + p.gamma2;
  const double g_cross = 2.0 * std::sqrt(p.gamma1 * p.gamma2);
  const double d_tot = 2.0 * (p.gd11 + p.gd22);
  const double d_cross = 4.0 * p.gd12;

  Matrix5d m = Matrix5d::Zero();
  // ordering: 0 = zz, 1 = yy, 2 = xx, 3 = xy, 4 = yx
  m(0, 0) = -g_sum;
  m(0, 1) = g_cross;

  m(1, 0) = g_cross;
  m(1, 1) = -(g_sum + d_tot);
  m(1, 2) = d_cross;
  m(1, 3) = p.delta1;
  m(1, 4) = p.delta2;

  m(2, 1) = d_cross;
  m(2, 2) = -d_tot;
  m(2, 3) = -p.delta2;
  m(2, 4) = -p.delta1;

  m(3, 1) = -p.delta1;
  m(3, 2) = p.delta2;
  m(3, 3) = -(p.gamma2 + d_tot);
  m(3, 4) = -d_cross;

  m(4, 1) = -p.delta2;
  m(4, 2) = p.delta1;
  m(4, 3) = -d_cross;
  m(4, 4) = -(p.gamma1 + d_tot);
  return m;
}

// Eigendecomposition of the generator applied to the initial tensor, with a
// dense-exponential fallback when the eigenvector basis is ill-conditioned.
struct TensorSolution {
  bool fallback = false;
  Matrix5cd vectors;
  Vector5cd values;
  Vector5cd weights;  // vectors * diag(exp(values t)) * weights = Phi(t)
  Matrix5d gen;

  explicit TensorSolution(const QmeParams& p) : gen(generator_matrix(p)) {
    const Eigen::EigenSolver<Matrix5d> es(gen);
    if (es.info() != Eigen::Success) {
      fallback = true;
      return;
    }
    vectors = es.eigenvectors();
    values = es.eigenvalues();

    const Eigen::JacobiSVD<Matrix5cd> svd(vectors);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(4);
    if (!(smin > 1e-10 * smax)) {
      fallback = true;
      return;
    }
    Vector5cd phi0;
    phi0 << 1.0, 0.0, 0.0, 0.0, 0.0;
    weights = vectors.partialPivLu().solve(phi0);
    if (!((vectors * weights - phi0).norm() < 1e-8)) fallback = true;
  }

  CorrelationVector at(double t) const {
    if (fallback) {
      std::vector<double> a(25);
      for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) a[5 * r + c] = gen(r, c) * t;
      const std::vector<double> e = detail::expm_dense(a, 5);
      // Phi(t) = expm(M t) * (1,0,0,0,0): first column.
      return {e[0], e[5], e[10], e[15], e[20]};
    }
    Vector5cd coeff = weights;
    for (int k = 0; k < 5; ++k) coeff(k) *= std::exp(values(k) * t);
    const Vector5cd phi = vectors * coeff;
    CorrelationVector out;
    for (int k = 0; k < 5; ++k) out[k] = phi(k).real();
    return out;
  }
};

}  // namespace

void QmeParams::validate() const {
  std::ostringstream err;
  if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0)) {
    err << "qme params: relaxation rates must be >= 0";
  } else if (!(gd11 >= 0.0) || !(gd22 >= 0.0)) {
    err << "qme params: local dephasing rates must be >= 0";
  } else if (std::abs(gd12) >
             std::sqrt(gd11 * gd22) + 1e-12 * (gd11 + gd22 + 1.0)) {
    err << "qme params: dephasing matrix not positive semidefinite "
        << "(|gd12| > sqrt(gd11 gd22))";
  } else if (!std::isfinite(delta1) || !std::isfinite(delta2)) {
    err << "qme params: detunings must be finite";
  } else {
    return;
  }
  throw std::invalid_argument(err.str());
}

double relaxation_rate(std::complex<double> amplitude, double tau_c) {
  if (!(tau_c > 0.0)) {
    throw std::invalid_argument("relaxation_rate: tau_c must be > 0");
  }
  return 2.0 * sqrt_2pi * tau_c * std::norm(amplitude);
}

double relaxation_rate_from_field(double b_eff, double tau_c, double gamma_e) {
  return relaxation_rate({gamma_e * b_eff, 0.0}, tau_c);
}

double amplitude_for_rate(double hgamma, double tau_c) {
  if (!(tau_c > 0.0) || hgamma < 0.0) {
    throw std::invalid_argument("amplitude_for_rate: bad inputs");
  }
  return std::sqrt(hgamma / (2.0 * sqrt_2pi * tau_c));
}

SingleSpin single_spin_polarization(double hgamma, double t) {
  if (t < 0.0) throw std::invalid_argument("single_spin: t must be >= 0");
  const double sz = std::exp(-hgamma * t);
  return {sz, 0.5 * (1.0 - sz)};
}

GeneratorMatrix build_correlation_generator(const QmeParams& p) {
  p.validate();
  const Matrix5d m = generator_matrix(p);
  GeneratorMatrix out;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) out[r][c] = m(r, c);
  return out;
}

TensorEvolution evolve_correlation_tensor(const QmeParams& p,
                                          std::span<const double> t_grid) {
  p.validate();
  const TensorSolution sol(p);

  TensorEvolution out;
  out.used_expm_fallback = sol.fallback;
  out.t.assign(t_grid.begin(), t_grid.end());
  out.phi.reserve(t_grid.size());
  out.phi_zz.reserve(t_grid.size());
  for (double t : t_grid) {
    if (t < 0.0) throw std::invalid_argument("tensor evolution: t must be >= 0");
    out.phi.push_back(sol.at(t));
    out.phi_zz.push_back(out.phi.back()[0]);
  }
  return out;
}

double analytic_connected_zz(double gamma1, double gamma2, double t) {
  if (t < 0.0) throw std::invalid_argument("connected_zz: t must be >= 0");
  if (gamma1 * gamma2 == 0.0) return 0.0;  // cosh(0) - 1
  const double a = std::sqrt(gamma1);
  const double b = std::sqrt(gamma2);
  // cosh(2 t ab) e^{-(g1+g2) t}, written overflow-safe.
  const double slow = std::exp(-(a - b) * (a - b) * t);
  const double fast = std::exp(-(a + b) * (a + b) * t);
  return 0.5 * (slow + fast) - std::exp(-(gamma1 + gamma2) * t);
}

namespace {

double pearson_from_phi(const QmeParams& p, double sigma_r1, double sigma_r2,
                        double t, double phi_zz) {
  // Small-t limit of the 0/0 ratio: r0 sqrt(G1 G2) t / (sR1 sR2).
  if ((p.gamma1 + p.gamma2) * t < 1e-6) {
    return p.r0 * std::sqrt(p.gamma1 * p.gamma2) * t / (sigma_r1 * sigma_r2);
  }
  const double product = std::exp(-(p.gamma1 + p.gamma2) * t);
  const double var1 = -std::expm1(-2.0 * p.gamma1 * t);
  const double var2 = -std::expm1(-2.0 * p.gamma2 * t);
  return p.r0 * (phi_zz - product) /
         (sigma_r1 * sigma_r2 * std::sqrt(var1 * var2));
}

void check_sigma_r(double sigma_r1, double sigma_r2) {
  if (!(sigma_r1 >= 1.0) || !(sigma_r2 >= 1.0)) {
    throw std::invalid_argument("pearson model: readout noise must be >= 1");
  }
}

}  // namespace

double pearson_model_t1(const QmeParams& p, double sigma_r1, double sigma_r2,
                        double t) {
  check_sigma_r(sigma_r1, sigma_r2);
  p.validate();
  if (t < 0.0) throw std::invalid_argument("pearson model: t must be >= 0");
  if (p.gamma1 * p.gamma2 == 0.0) return 0.0;  // no co-relaxation channel
  if ((p.gamma1 + p.gamma2) * t < 1e-6) {
    return pearson_from_phi(p, sigma_r1, sigma_r2, t, 1.0);
  }
  const double grid[1] = {t};
  const auto evo = evolve_correlation_tensor(p, grid);
  return pearson_from_phi(p, sigma_r1, sigma_r2, t, evo.phi_zz[0]);
}

std::vector<double> pearson_model_t1_grid(const QmeParams& p, double sigma_r1,
                                          double sigma_r2,
                                          std::span<const double> t_grid) {
  check_sigma_r(sigma_r1, sigma_r2);
  p.validate();
  std::vector<double> out(t_grid.size(), 0.0);
  if (p.gamma1 * p.gamma2 == 0.0) return out;
  const TensorSolution sol(p);
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double t = t_grid[k];
    if (t < 0.0) throw std::invalid_argument("pearson model: t must be >= 0");
    const double phi_zz =
        (p.gamma1 + p.gamma2) * t < 1e-6 ? 1.0 : sol.at(t)[0];
    out[k] = pearson_from_phi(p, sigma_r1, sigma_r2, t, phi_zz);
  }
  return out;
}

namespace detail {

// Pade order-13 scaling-and-squaring (Higham 2005).
std::vector<double> expm_dense(const std::vector<double>& a, std::size_t n) {
  if (a.size() != n * n) throw std::invalid_argument("expm: bad dimensions");
  using Mat = Eigen::MatrixXd;
  Mat m(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m(r, c) = a[n * r + c];

  static const double b[14] = {64764752532480000.0, 32382376266240000.0,
                               7771770303897600.0,  1187353796428800.0,
                               129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,
                               1323241920.0,        40840800.0,
                               960960.0,            16380.0,
                               182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    m /= std::ldexp(1.0, squarings);
  }

  const Mat identity = Mat::Identity(n, n);
  const Mat m2 = m * m;
  const Mat m4 = m2 * m2;
  const Mat m6 = m4 * m2;
  const Mat u = m * (m6 * (b[13] * m6 + b[11] * m4 + b[9] * m2) +
                     b[7] * m6 + b[5] * m4 + b[3] * m2 + b[1] * identity);
  const Mat v = m6 * (b[12] * m6 + b[10] * m4 + b[8] * m2) + b[6] * m6 +
                b[4] * m4 + b[2] * m2 + b[0] * identity;
  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s) r = r * r;

  std::vector<double> out(n * n);
  for (std::size_t row = 0; row < n; ++row)
    for (std::size_t col = 0; col < n; ++col) out[n * row + col] = r(row, col);
  return out;
}

}  // namespace detail

}  // namespace covmag
