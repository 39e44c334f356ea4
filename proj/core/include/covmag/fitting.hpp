#pragma once

// Derivative-free nonlinear least squares for the toolkit's model functions,
// including the joint correlated-T1 fit that shares a prefactor and the
// correlated dephasing rate across detuning datasets.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covmag/qme.hpp"

namespace covmag {

enum class ModelKind {
  saturation,          // I0 P / (P + Ps)
  stretched_exp,       // A exp(-(t/tau)^n) + C
  single_exp,          // A exp(-t/T1) + C
  bessel_calibration,  // c + a J0(gamma kappa V N / (pi f))
  t2_lineshape,        // single-tone closed form vs probe frequency
  qme_correlation,     // pearson_model_t1 vs time
  damped_multicosine,  // sum_k a_k cos(2 pi f_k t + psi_k) exp(-(t/T)^p) + c
};

ModelKind model_kind_from_name(const std::string& name);
std::string model_kind_name(ModelKind kind);

// Parameter names of a model; every one must be either fixed or free.
std::vector<std::string> model_parameter_names(ModelKind kind);

struct FreeParam {
  std::string name;
  double lower = -1e300;
  double upper = 1e300;
};

struct ModelSpec {
  ModelKind kind = ModelKind::single_exp;
  std::map<std::string, double> fixed_params;
  std::vector<FreeParam> free_params;

  void validate() const;
};

// Evaluates a model at x with a complete parameter map.
double evaluate_model(ModelKind kind, double x,
                      const std::map<std::string, double>& params);

struct DataPoint {
  double x = 0.0;
  double y = 0.0;
  std::optional<double> y_err;  // absent -> unit weight
};

struct FittedParam {
  double value = 0.0;
  std::optional<double> stderr_;  // absent when the curvature is singular
};

struct FitResult {
  std::map<std::string, FittedParam> params;
  double residual_sse = 0.0;
  std::size_t n_iterations = 0;
  bool converged = false;
  std::vector<double> best_sse_trace;  // best-vertex SSE per iteration
};

struct NelderMeadOptions {
  double relative_tolerance = 1e-10;  // simplex diameter, relative
  std::size_t max_iterations = 2000;
  int restarts = 1;  // perturbed restarts after first convergence
  std::uint64_t restart_seed = 0x5eed5eedULL;
};

// Minimizes fn over n parameters with box bounds (projection). Deterministic
// for fixed options.
FitResult nelder_mead(const std::function<double(std::span<const double>)>& fn,
                      std::span<const double> init,
                      std::span<const double> lower,
                      std::span<const double> upper,
                      const NelderMeadOptions& options = {});

FitResult fit_model(const ModelSpec& spec, std::span<const DataPoint> data,
                    const std::map<std::string, double>& init,
                    const NelderMeadOptions& options = {});

struct CorrelatedT1Dataset {
  double delta1 = 0.0;  // rad/s
  std::vector<DataPoint> points;  // x = time (s), y = measured r
};

struct CorrelatedT1Known {
  double gamma1 = 0.0;  // 1/s
  double gamma2 = 0.0;  // 1/s
  double delta2 = 0.0;  // rad/s
  double sigma_r1 = 1.0;
  double sigma_r2 = 1.0;
};

struct CorrelatedT1Fit {
  FittedParam r0;
  FittedParam gd12;
  std::vector<FittedParam> gd_tot;  // one per dataset, dataset order
  double residual_sse = 0.0;
  std::size_t n_iterations = 0;
  bool converged = false;
};

// Joint fit of r0 and gd12 (shared) plus one local dephasing total per
// dataset; the positive-semidefiniteness bound |gd12| <= gd_tot/2 is enforced
// through the parameter bounds.
CorrelatedT1Fit fit_correlated_t1(std::span<const CorrelatedT1Dataset> datasets,
                                  const CorrelatedT1Known& known,
                                  const NelderMeadOptions& options = {});

struct LocalDephasing {
  std::map<double, double> gd11;  // per detuning key
  double gd22 = 0.0;
  bool has_negative = false;  // some gd11 came out below zero (flagged, kept)
};

// gd22 = gd_tot(reference)/2; gd11(delta) = gd_tot(delta) - gd22.
LocalDephasing extract_local_dephasing(
    const std::map<double, double>& gd_tot_per_detuning,
    double reference_detuning);

}  // namespace covmag
